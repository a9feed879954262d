"""On-disk dataset layout.

An input directory holds, per sample, one calibration document and a
depth/semantic tensor pair per camera, plus an ordered ``manifest.txt``::

    manifest.txt
    <sample>__calibration.json
    <sample>__<camera>__depth.vxt
    <sample>__<camera>__semantic.vxt

Output directories hold per-sample label grids (``<sample>__labels.vxt``
with a ``<sample>__gridspec.json`` sidecar) and visibility masks
(``<sample>__mask.vxt`` with the same sidecar convention).
"""

import os

import numpy as np

from . import tensorio
from .geometry import Intrinsics, RigidTransform
from .pointcloud import CameraSample

MANIFEST = "manifest.txt"


def manifest_path(directory):
    return os.path.join(directory, MANIFEST)


def read_manifest(directory):
    path = manifest_path(directory)
    if not os.path.isfile(path):
        raise ValueError(f"missing manifest {path}")
    with open(path) as fh:
        ids = [line.strip() for line in fh if line.strip()]
    if not ids:
        raise ValueError(f"empty manifest {path}")
    return ids


def write_manifest(directory, sample_ids):
    with open(manifest_path(directory), "w") as fh:
        for sid in sample_ids:
            fh.write(f"{sid}\n")


def calibration_path(directory, sample_id):
    return os.path.join(directory, f"{sample_id}__calibration.json")


def depth_path(directory, sample_id, camera_id):
    return os.path.join(directory, f"{sample_id}__{camera_id}__depth.vxt")


def semantic_path(directory, sample_id, camera_id):
    return os.path.join(directory, f"{sample_id}__{camera_id}__semantic.vxt")


def labels_path(directory, sample_id):
    return os.path.join(directory, f"{sample_id}__labels.vxt")


def gridspec_path(directory, sample_id):
    return os.path.join(directory, f"{sample_id}__gridspec.json")


def mask_path(directory, sample_id):
    return os.path.join(directory, f"{sample_id}__mask.vxt")


def write_sample(directory, sample_id, camera_samples, T_global_to_ego):
    """Write one sample's tensors and calibration document."""
    cameras = []
    for cam in camera_samples:
        tensorio.write_tensor(depth_path(directory, sample_id, cam.camera_id),
                              cam.depth.astype(np.float32))
        tensorio.write_tensor(semantic_path(directory, sample_id, cam.camera_id),
                              cam.semantic.astype(np.uint8))
        cameras.append(tensorio.CameraCalibration(
            cam.camera_id, cam.intrinsics.matrix(), cam.camera_to_global.to_matrix()))
    record = tensorio.CalibrationRecord(sample_id, cameras, T_global_to_ego.to_matrix())
    record.validate()
    tensorio.write_calibration(calibration_path(directory, sample_id), record)


def read_sample(directory, sample_id):
    """Load one sample: its camera samples and the global-to-ego transform."""
    record = tensorio.read_calibration(calibration_path(directory, sample_id))
    if record.sample_id != sample_id:
        raise ValueError(
            f"calibration for {sample_id} declares sample_id {record.sample_id}"
        )
    samples = []
    for cam in record.cameras:
        depth = tensorio.read_tensor(depth_path(directory, sample_id, cam.camera_id))
        semantic = tensorio.read_tensor(semantic_path(directory, sample_id, cam.camera_id))
        if depth.ndim != 2 or semantic.ndim != 2:
            raise ValueError(f"camera {cam.camera_id}: depth and semantics must be 2-d")
        height, width = depth.shape
        samples.append(CameraSample(
            cam.camera_id,
            depth.astype(np.float64),
            semantic,
            Intrinsics.from_matrix(cam.K, width, height),
            RigidTransform.from_matrix(cam.T_camera_to_global),
        ))
    return samples, RigidTransform.from_matrix(record.T_global_to_ego)
