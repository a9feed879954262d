import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voxlab import tensorio


def test_known_bytes_layout(tmp_path):
    path = tmp_path / "t.vxt"
    tensorio.write_tensor(path, np.array([[1, 2], [3, 4]], dtype=np.uint8))
    blob = path.read_bytes()
    assert blob[:4] == b"VXT1"
    code, ndim = struct.unpack_from("<BB", blob, 4)
    assert (code, ndim) == (0, 2)
    assert struct.unpack_from("<2I", blob, 6) == (2, 2)
    assert blob[14:] == bytes([1, 2, 3, 4])


def test_round_trip_dtypes(tmp_path):
    arrays = [
        np.arange(24, dtype=np.uint8).reshape(2, 3, 4),
        np.linspace(-1.0, 1.0, 10, dtype=np.float32),
        np.array([[2**40, 7]], dtype=np.uint64),
    ]
    for i, arr in enumerate(arrays):
        path = tmp_path / f"a{i}.vxt"
        tensorio.write_tensor(path, arr)
        back = tensorio.read_tensor(path)
        assert back.dtype == arr.dtype
        assert back.shape == arr.shape
        np.testing.assert_array_equal(back, arr)


def test_noncontiguous_written_row_major(tmp_path):
    arr = np.arange(16, dtype=np.uint8).reshape(4, 4).T
    path = tmp_path / "t.vxt"
    tensorio.write_tensor(path, arr)
    np.testing.assert_array_equal(tensorio.read_tensor(path), arr)


def test_bad_magic(tmp_path):
    path = tmp_path / "t.vxt"
    path.write_bytes(b"NOPE" + bytes(10))
    with pytest.raises(ValueError, match="bad magic"):
        tensorio.read_tensor(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "t.vxt"
    tensorio.write_tensor(path, np.ones((3, 3), dtype=np.float32))
    blob = path.read_bytes()
    path.write_bytes(blob[:-5])
    with pytest.raises(ValueError, match="truncated payload"):
        tensorio.read_tensor(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "t.vxt"
    tensorio.write_tensor(path, np.ones(4, dtype=np.uint8))
    path.write_bytes(path.read_bytes() + b"x")
    with pytest.raises(ValueError, match="mismatch"):
        tensorio.read_tensor(path)


def test_zero_dim_rejected(tmp_path):
    with pytest.raises(ValueError):
        tensorio.write_tensor(tmp_path / "t.vxt", np.float32(1.0))
    with pytest.raises(ValueError):
        tensorio.write_tensor(tmp_path / "t.vxt", np.empty((2, 0), dtype=np.uint8))


def test_unsupported_dtype(tmp_path):
    with pytest.raises(ValueError, match="unsupported dtype"):
        tensorio.write_tensor(tmp_path / "t.vxt", np.ones(3, dtype=np.int32))


@settings(max_examples=40, deadline=None)
@given(
    dtype=st.sampled_from(["uint8", "float32", "uint64"]),
    shape=st.lists(st.integers(min_value=1, max_value=5), min_size=1, max_size=4),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_round_trip_property(tmp_path_factory, dtype, shape, seed):
    rng = np.random.default_rng(seed)
    if dtype == "float32":
        arr = rng.normal(size=shape).astype(np.float32)
    else:
        arr = rng.integers(0, 200, size=shape).astype(dtype)
    path = tmp_path_factory.mktemp("vxt") / "t.vxt"
    tensorio.write_tensor(path, arr)
    back = tensorio.read_tensor(path)
    assert back.dtype == arr.dtype and back.shape == arr.shape
    np.testing.assert_array_equal(back, arr)


def _valid_doc():
    return {
        "sample_id": "s0001",
        "cameras": [
            {
                "camera_id": "cam_00",
                "K": [100.0, 0.0, 32.0, 0.0, 100.0, 24.0, 0.0, 0.0, 1.0],
                "T_camera_to_global": [1, 0, 0, 5, 0, 1, 0, -2, 0, 0, 1, 1.6, 0, 0, 0, 1],
            },
            {
                "camera_id": "cam_01",
                "K": [80.0, 0.0, 32.0, 0.0, 80.0, 24.0, 0.0, 0.0, 1.0],
                "T_camera_to_global": [0, -1, 0, 0, 1, 0, 0, 0, 0, 0, 1, 1.6, 0, 0, 0, 1],
            },
        ],
        "T_global_to_ego": [1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1],
    }


def _write(tmp_path, doc):
    path = tmp_path / "calib.json"
    path.write_text(json.dumps(doc))
    return path


def test_calibration_round_trip(tmp_path):
    record = tensorio.read_calibration(_write(tmp_path, _valid_doc()))
    assert record.sample_id == "s0001"
    assert [c.camera_id for c in record.cameras] == ["cam_00", "cam_01"]
    assert record.cameras[0].K[0, 0] == 100.0
    assert record.cameras[0].T_camera_to_global[2, 3] == 1.6
    out = tmp_path / "again.json"
    tensorio.write_calibration(out, record)
    again = tensorio.read_calibration(out)
    np.testing.assert_array_equal(again.T_global_to_ego, record.T_global_to_ego)


def test_calibration_bad_k_names_camera(tmp_path):
    doc = _valid_doc()
    doc["cameras"][1]["K"][8] = 2.0
    with pytest.raises(ValueError, match="cam_01"):
        tensorio.read_calibration(_write(tmp_path, doc))


def test_calibration_bad_bottom_row(tmp_path):
    doc = _valid_doc()
    doc["cameras"][0]["T_camera_to_global"][12] = 0.5
    with pytest.raises(ValueError, match="cam_00"):
        tensorio.read_calibration(_write(tmp_path, doc))


def test_calibration_bad_determinant(tmp_path):
    doc = _valid_doc()
    # A reflection: orthonormal but with determinant -1.
    doc["T_global_to_ego"] = [1, 0, 0, 0, 0, 1, 0, 0, 0, 0, -1, 0, 0, 0, 0, 1]
    with pytest.raises(ValueError, match="determinant"):
        tensorio.read_calibration(_write(tmp_path, doc))


def test_calibration_missing_key(tmp_path):
    doc = _valid_doc()
    del doc["cameras"][0]["K"]
    with pytest.raises(ValueError, match="missing key"):
        tensorio.read_calibration(_write(tmp_path, doc))


def test_calibration_malformed_json(tmp_path):
    path = tmp_path / "calib.json"
    path.write_text("{not json")
    with pytest.raises(ValueError, match="malformed"):
        tensorio.read_calibration(path)


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**31),
    fault=st.sampled_from(["none", "k_row", "bottom_row", "det"]),
)
def test_calibration_accepts_valid_rejects_invalid(tmp_path_factory, seed, fault):
    from helpers import random_rotation

    rng = np.random.default_rng(seed)
    R = random_rotation(rng)
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = rng.uniform(-10, 10, 3)
    K = [150.0, 0.0, 60.0, 0.0, 150.0, 40.0, 0.0, 0.0, 1.0]
    if fault == "k_row":
        K[6] = 0.25
    if fault == "bottom_row":
        T[3, 0] = 1e-3
    if fault == "det":
        T[:3, 0] *= 1.001
    doc = {
        "sample_id": "s",
        "cameras": [{"camera_id": "c0", "K": K,
                     "T_camera_to_global": T.reshape(-1).tolist()}],
        "T_global_to_ego": np.eye(4).reshape(-1).tolist(),
    }
    path = tmp_path_factory.mktemp("calib") / "c.json"
    path.write_text(json.dumps(doc))
    if fault == "none":
        tensorio.read_calibration(path)
    else:
        with pytest.raises(ValueError):
            tensorio.read_calibration(path)
