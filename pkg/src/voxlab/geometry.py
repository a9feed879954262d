"""Pinhole cameras and rigid transforms.

Camera frame convention: +z forward, +x right, +y down.  Depth is the +z
camera-frame coordinate, not the ray length.  Pixel coordinates are used
verbatim; there is no half-pixel center offset.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if not (self.width >= 1 and self.height >= 1):
            raise ValueError(f"image size must be >= 1, got {self.width}x{self.height}")

    @classmethod
    def from_matrix(cls, K, width, height):
        K = np.asarray(K, dtype=np.float64)
        if K[0, 1] != 0.0:
            raise ValueError(f"skewed intrinsics are not supported, K[0][1]={K[0, 1]}")
        return cls(float(K[0, 0]), float(K[1, 1]), float(K[0, 2]), float(K[1, 2]),
                   int(width), int(height))

    def matrix(self):
        return np.array([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])

    def inverse_matrix(self):
        # Built analytically so the bottom row is exactly (0, 0, 1).
        return np.array([
            [1.0 / self.fx, 0.0, -self.cx / self.fx],
            [0.0, 1.0 / self.fy, -self.cy / self.fy],
            [0.0, 0.0, 1.0],
        ])


@dataclass(frozen=True)
class RigidTransform:
    """Rotation plus translation, stored as a 3x3 matrix and a 3-vector."""

    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, M, validate=True):
        M = np.asarray(M, dtype=np.float64).reshape(4, 4)
        if validate:
            if not np.allclose(M[3], [0.0, 0.0, 0.0, 1.0], rtol=0.0, atol=1e-12):
                raise ValueError(f"bottom row must be (0, 0, 0, 1), got {M[3].tolist()}")
        t = cls(M[:3, :3].copy(), M[:3, 3].copy())
        if validate:
            t.check_rotation()
        return t

    def check_rotation(self, tol=1e-6):
        R = self.rotation
        if np.max(np.abs(R @ R.T - np.eye(3))) > tol:
            raise ValueError("rotation is not orthonormal")
        if abs(float(np.linalg.det(R)) - 1.0) > tol:
            raise ValueError("rotation determinant is not +1")

    def to_matrix(self):
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def inverse(self):
        R = self.rotation.T
        return RigidTransform(R, -R @ self.translation)

    def apply(self, points):
        """Map points (shape (3,) or (..., 3)) through the transform."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation


def compose(a, b):
    """Transform equal to applying ``b`` first, then ``a``."""
    return RigidTransform(a.rotation @ b.rotation,
                          a.rotation @ b.translation + a.translation)


def unproject_pixel(intrinsics, pose, u, v, depth):
    """Lift pixel(s) at integer coordinates (u, v) with positive depth into
    the frame that ``pose`` maps camera coordinates into.

    Accepts scalars or broadcastable arrays; returns shape (..., 3).  The
    camera-frame z of the lifted point equals ``depth`` exactly.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    d = np.asarray(depth, dtype=np.float64)
    if np.any(d <= 0):
        raise ValueError("depth must be positive")
    if np.any((u < 0) | (u >= intrinsics.width) | (v < 0) | (v >= intrinsics.height)):
        raise ValueError("pixel out of bounds")
    x = (u - intrinsics.cx) / intrinsics.fx * d
    y = (v - intrinsics.cy) / intrinsics.fy * d
    cam = np.stack(np.broadcast_arrays(x, y, d), axis=-1)
    return pose.apply(cam)


def project_point(intrinsics, pose, point):
    """Project one world point into the camera described by ``pose``
    (camera-to-world).  Returns (u, v, depth), or None when the point lies
    at or behind the camera plane (z <= 0)."""
    cam = pose.inverse().apply(np.asarray(point, dtype=np.float64))
    z = float(cam[2])
    if z <= 0.0:
        return None
    return (float(cam[0] / z * intrinsics.fx + intrinsics.cx),
            float(cam[1] / z * intrinsics.fy + intrinsics.cy),
            z)


def project_points(intrinsics, pose, points):
    """Vectorized projection.  Returns (u, v, depth, in_front) arrays; u and
    v are only meaningful where ``in_front`` is True."""
    cam = pose.inverse().apply(np.asarray(points, dtype=np.float64))
    z = cam[..., 2]
    in_front = z > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cam[..., 0] / z * intrinsics.fx + intrinsics.cx
        v = cam[..., 1] / z * intrinsics.fy + intrinsics.cy
    return u, v, z, in_front
