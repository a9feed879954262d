"""Binary tensor container and calibration documents.

Everything that crosses a process boundary goes through this module: dense
tensors travel in the little-endian ``VXT1`` container, calibration records
travel as JSON.

``VXT1`` layout, in order:

* magic, 4 bytes ``b"VXT1"``
* dtype code, u8: 0 = uint8, 1 = float32, 2 = uint64
* ndim, u8
* dims, ndim x u32 little-endian, each >= 1
* payload, row-major little-endian, exactly prod(dims) elements
"""

import json
import struct

import numpy as np

MAGIC = b"VXT1"

_CODE_TO_DTYPE = {
    0: np.dtype("u1"),
    1: np.dtype("<f4"),
    2: np.dtype("<u8"),
}
_KIND_TO_CODE = {
    np.dtype("u1"): 0,
    np.dtype("f4"): 1,
    np.dtype("u8"): 2,
}


def write_tensor(path, data):
    """Serialize ``data`` (uint8, float32, or uint64) to ``path``.

    The array is written in row-major order regardless of its memory
    layout.  Zero-sized and zero-dimensional arrays are rejected.
    """
    arr = np.asarray(data)
    key = np.dtype(arr.dtype.str.lstrip("<>=|"))
    if key not in _KIND_TO_CODE:
        raise ValueError(f"unsupported dtype {arr.dtype}")
    if arr.ndim == 0:
        raise ValueError("zero-dimensional tensors are not supported")
    if arr.ndim > 255:
        raise ValueError("too many dimensions")
    if any(d < 1 for d in arr.shape):
        raise ValueError(f"dims must all be >= 1, got {arr.shape}")
    arr = np.ascontiguousarray(arr, dtype=key.newbyteorder("<"))
    header = MAGIC + struct.pack(
        "<BB", _KIND_TO_CODE[key], arr.ndim
    ) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes())


def read_tensor(path):
    """Read a ``VXT1`` tensor from ``path`` into a numpy array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ValueError(f"bad magic in {path}")
    if len(blob) < 6:
        raise ValueError(f"truncated header in {path}")
    code, ndim = struct.unpack_from("<BB", blob, 4)
    if code not in _CODE_TO_DTYPE:
        raise ValueError(f"unknown dtype code {code} in {path}")
    if ndim < 1:
        raise ValueError(f"invalid ndim {ndim} in {path}")
    if len(blob) < 6 + 4 * ndim:
        raise ValueError(f"truncated header in {path}")
    dims = struct.unpack_from(f"<{ndim}I", blob, 6)
    if any(d < 1 for d in dims):
        raise ValueError(f"dims must all be >= 1, got {dims} in {path}")
    dtype = _CODE_TO_DTYPE[code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    payload = blob[6 + 4 * ndim:]
    if len(payload) < expected:
        raise ValueError(f"truncated payload in {path}")
    if len(payload) > expected:
        raise ValueError(f"dims/payload mismatch in {path}: {len(payload) - expected} trailing bytes")
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


class CameraCalibration:
    """Per-camera intrinsics and camera-to-global pose, as plain matrices."""

    def __init__(self, camera_id, K, T_camera_to_global):
        self.camera_id = str(camera_id)
        self.K = np.asarray(K, dtype=np.float64).reshape(3, 3)
        self.T_camera_to_global = np.asarray(
            T_camera_to_global, dtype=np.float64
        ).reshape(4, 4)


class CalibrationRecord:
    """One sample's calibration: cameras plus the global-to-ego transform."""

    def __init__(self, sample_id, cameras, T_global_to_ego):
        self.sample_id = str(sample_id)
        self.cameras = list(cameras)
        self.T_global_to_ego = np.asarray(
            T_global_to_ego, dtype=np.float64
        ).reshape(4, 4)

    def validate(self):
        """Check the documented invariants, raising ValueError on the first
        violation.  Camera-level messages name the offending camera_id."""
        for cam in self.cameras:
            K = cam.K
            if not (K[2, 0] == 0.0 and K[2, 1] == 0.0 and K[2, 2] == 1.0):
                raise ValueError(
                    f"camera {cam.camera_id}: bottom row of K must be (0, 0, 1), got {K[2].tolist()}"
                )
            _check_transform(cam.T_camera_to_global, f"camera {cam.camera_id}: T_camera_to_global")
        _check_transform(self.T_global_to_ego, "T_global_to_ego")
        seen = set()
        for cam in self.cameras:
            if cam.camera_id in seen:
                raise ValueError(f"duplicate camera_id {cam.camera_id}")
            seen.add(cam.camera_id)


def _check_transform(T, what):
    if not np.array_equal(T[3], [0.0, 0.0, 0.0, 1.0]):
        raise ValueError(f"{what}: bottom row must be (0, 0, 0, 1), got {T[3].tolist()}")
    det = float(np.linalg.det(T[:3, :3]))
    if abs(det - 1.0) > 1e-6:
        raise ValueError(f"{what}: rotation determinant {det} not within 1e-6 of +1")


def write_calibration(path, record):
    """Write a CalibrationRecord as a JSON document."""
    doc = {
        "sample_id": record.sample_id,
        "cameras": [
            {
                "camera_id": cam.camera_id,
                "K": [float(x) for x in cam.K.reshape(-1)],
                "T_camera_to_global": [float(x) for x in cam.T_camera_to_global.reshape(-1)],
            }
            for cam in record.cameras
        ],
        "T_global_to_ego": [float(x) for x in record.T_global_to_ego.reshape(-1)],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_calibration(path):
    """Read and validate a CalibrationRecord from a JSON document."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed calibration document {path}: {exc}") from exc
    try:
        cameras = [
            CameraCalibration(c["camera_id"], c["K"], c["T_camera_to_global"])
            for c in doc["cameras"]
        ]
        record = CalibrationRecord(doc["sample_id"], cameras, doc["T_global_to_ego"])
    except KeyError as exc:
        raise ValueError(f"calibration document {path} missing key {exc}") from exc
    record.validate()
    return record
