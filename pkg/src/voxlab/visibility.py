"""Camera-visibility masks via exact voxel traversal.

For every pixel on a stride grid, a ray is cast from the camera center and
walked through the grid with an amortized step-per-voxel traversal (the
classic two-max/one-delta scheme): each axis keeps the ray parameter of its
next boundary crossing, and the smallest one decides the axis to step.
Every traversed voxel is marked visible up to and including the first
occupied one; the union over all cameras and pixels is the mask.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import tensorio
from .pointcloud import EMPTY_CLASS
from .voxelizer import GridSpec


@dataclass
class CameraMask:
    """Boolean visibility grid with the same shape as its label grid."""

    spec: GridSpec
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=bool)
        if self.data.shape != self.spec.dims:
            raise ValueError(f"mask shape {self.data.shape} does not match spec dims {self.spec.dims}")


def compute_mask(grid, cameras, ray_stride=4):
    """Visibility union over ``cameras``, a list of (Intrinsics,
    camera-to-ego RigidTransform) pairs, against the occupancy of ``grid``.

    Rays start at each camera center; empty voxels in front of the first
    occupied voxel are visible, as is that occupied voxel itself.
    """
    if ray_stride < 1:
        raise ValueError(f"ray_stride must be >= 1, got {ray_stride}")
    spec = grid.spec
    occupied = (grid.data != EMPTY_CLASS).reshape(-1)
    visible = np.zeros(spec.voxel_count, dtype=bool)
    for intrinsics, camera_to_ego in cameras:
        us = np.arange(0, intrinsics.width, ray_stride, dtype=np.float64)
        vs = np.arange(0, intrinsics.height, ray_stride, dtype=np.float64)
        uu, vv = np.meshgrid(us, vs)
        rays_cam = np.stack([
            (uu.reshape(-1) - intrinsics.cx) / intrinsics.fx,
            (vv.reshape(-1) - intrinsics.cy) / intrinsics.fy,
            np.ones(uu.size),
        ], axis=1)
        directions = rays_cam @ camera_to_ego.rotation.T
        origin = camera_to_ego.translation
        _march(origin, directions, spec, occupied, visible)
    return CameraMask(spec, visible.reshape(spec.dims))


def mask_count(mask):
    return int(np.count_nonzero(mask.data))


def _march(origin, directions, spec, occupied, visible):
    lo = np.asarray(spec.minimum)
    hi = np.asarray(spec.maximum)
    dims = np.asarray(spec.dims)
    vs = spec.voxel_size
    d = directions
    n = len(d)

    # Clip each ray to the grid box.  Zero direction components contribute
    # (-inf, +inf) when the origin lies inside that slab and an empty
    # interval otherwise.
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = (lo - origin) / d
        t_hi = (hi - origin) / d
    zero = d == 0.0
    inside = (origin >= lo) & (origin < hi)
    t_lo = np.where(zero, np.where(inside, -np.inf, np.inf), t_lo)
    t_hi = np.where(zero, np.where(inside, np.inf, -np.inf), t_hi)
    t_near = np.minimum(t_lo, t_hi).max(axis=1)
    t_far = np.maximum(t_lo, t_hi).min(axis=1)
    t_start = np.maximum(t_near, 0.0)
    active = t_far > t_start

    entry = origin + t_start[:, None] * d
    voxel = np.floor((entry - lo) * (1.0 / vs)).astype(np.int64)
    np.clip(voxel, 0, dims - 1, out=voxel)

    step = np.sign(d).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_delta = np.where(zero, np.inf, vs / np.abs(d))
        boundary = lo + (voxel + (step > 0)) * vs
        t_max = np.where(zero, np.inf, (boundary - origin) / d)

    ny, nz = int(dims[1]), int(dims[2])
    while True:
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        lin = (voxel[rows, 0] * ny + voxel[rows, 1]) * nz + voxel[rows, 2]
        visible[lin] = True
        hit = occupied[lin]
        active[rows[hit]] = False
        rows = rows[~hit]
        if rows.size == 0:
            break
        axis = np.argmin(t_max[rows], axis=1)
        voxel[rows, axis] += step[rows, axis]
        t_max[rows, axis] += t_delta[rows, axis]
        moved = voxel[rows, axis]
        out = (moved < 0) | (moved >= dims[axis])
        active[rows[out]] = False


def save_mask(mask, tensor_path, spec_path):
    tensorio.write_tensor(tensor_path, mask.data.astype(np.uint8))
    with open(spec_path, "w") as fh:
        json.dump(mask.spec.to_dict(), fh, indent=2)
        fh.write("\n")


def load_mask(tensor_path, spec_path):
    with open(spec_path) as fh:
        spec = GridSpec.from_dict(json.load(fh))
    data = tensorio.read_tensor(tensor_path)
    if data.dtype != np.uint8 or np.any(data > 1):
        raise ValueError(f"mask {tensor_path} must be uint8 zeros and ones")
    return CameraMask(spec, data.astype(bool))
