"""Labeled point clouds: lifting camera samples, merging, outlier removal.

The label space has 18 classes.  Index 17 means "empty" and never appears
on a point: empty pixels are simply not lifted.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Intrinsics, RigidTransform, unproject_pixel

NUM_CLASSES = 18
EMPTY_CLASS = 17

_DEFAULT_NAMES = (
    "others", "barrier", "bicycle", "bus", "car", "construction_vehicle",
    "motorcycle", "pedestrian", "traffic_cone", "trailer", "truck",
    "driveable_surface", "other_flat", "sidewalk", "terrain", "manmade",
    "vegetation", "empty",
)
# Vehicles and pedestrians move between observations; barriers and traffic
# cones are treated as static street furniture.
_DEFAULT_DYNAMIC = frozenset({2, 3, 4, 5, 6, 7, 9, 10})


@dataclass(frozen=True)
class LabelSpace:
    names: tuple = _DEFAULT_NAMES
    dynamic_set: frozenset = _DEFAULT_DYNAMIC

    def __post_init__(self):
        if len(self.names) != NUM_CLASSES:
            raise ValueError(f"expected {NUM_CLASSES} class names, got {len(self.names)}")
        if self.names[EMPTY_CLASS] != "empty":
            raise ValueError(f"class {EMPTY_CLASS} must be named 'empty'")
        bad = [c for c in self.dynamic_set if not 0 <= c < EMPTY_CLASS]
        if bad:
            raise ValueError(f"dynamic classes out of range: {sorted(bad)}")


def default_label_space():
    return LabelSpace()


@dataclass
class CameraSample:
    """One camera's observation at one timestep."""

    camera_id: str
    depth: np.ndarray
    semantic: np.ndarray
    intrinsics: Intrinsics
    camera_to_global: RigidTransform

    def __post_init__(self):
        if self.depth.shape != self.semantic.shape:
            raise ValueError(
                f"camera {self.camera_id}: shape mismatch between depth {self.depth.shape} "
                f"and semantics {self.semantic.shape}"
            )
        expected = (self.intrinsics.height, self.intrinsics.width)
        if self.depth.shape != expected:
            raise ValueError(
                f"camera {self.camera_id}: shape mismatch between maps {self.depth.shape} "
                f"and intrinsics {expected}"
            )


@dataclass
class SemanticPointCloud:
    """Points (N, 3) with uint8 class labels and int32 timestep stamps.

    Stamps are relative: 0 for the current sample, negative for history.
    """

    points: np.ndarray
    labels: np.ndarray
    stamp: np.ndarray = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.labels = np.asarray(self.labels, dtype=np.uint8).reshape(-1)
        if self.stamp is None:
            self.stamp = np.zeros(len(self.points), dtype=np.int32)
        self.stamp = np.asarray(self.stamp, dtype=np.int32).reshape(-1)
        if not (len(self.points) == len(self.labels) == len(self.stamp)):
            raise ValueError("points, labels, and stamp must have equal length")
        if np.any(self.labels >= NUM_CLASSES):
            raise ValueError("labels must be < 18")
        if np.any(self.labels == EMPTY_CLASS):
            raise ValueError("the empty class never appears on a point")

    def __len__(self):
        return len(self.points)

    @classmethod
    def empty(cls):
        return cls(np.empty((0, 3)), np.empty(0, dtype=np.uint8))

    def select(self, mask_or_index):
        return SemanticPointCloud(self.points[mask_or_index],
                                  self.labels[mask_or_index],
                                  self.stamp[mask_or_index])

    def with_stamp(self, value):
        return SemanticPointCloud(self.points, self.labels,
                                  np.full(len(self), value, dtype=np.int32))

    def transformed(self, transform):
        return SemanticPointCloud(transform.apply(self.points), self.labels, self.stamp)


def lift_camera(sample, stride=1):
    """Unproject one camera sample into a global-frame point cloud.

    One point per pixel on the stride grid whose depth is positive and
    whose semantic label is not empty.  Stamps are 0.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    depth = sample.depth[::stride, ::stride]
    semantic = sample.semantic[::stride, ::stride]
    keep = (depth > 0) & (semantic != EMPTY_CLASS)
    vi, ui = np.nonzero(keep)
    if vi.size == 0:
        return SemanticPointCloud.empty()
    points = unproject_pixel(sample.intrinsics, sample.camera_to_global,
                             ui * stride, vi * stride, depth[keep])
    return SemanticPointCloud(points, semantic[keep].astype(np.uint8))


def merge_cameras(clouds):
    """Concatenate per-camera clouds into one (a multiset union)."""
    clouds = list(clouds)
    if not clouds:
        return SemanticPointCloud.empty()
    return SemanticPointCloud(
        np.concatenate([c.points for c in clouds]),
        np.concatenate([c.labels for c in clouds]),
        np.concatenate([c.stamp for c in clouds]),
    )


def remove_outliers(cloud, k=20, std_ratio=2.0):
    """Statistical outlier removal.

    Each point's mean distance to its k nearest neighbors is computed; a
    point is dropped when that mean exceeds mu + std_ratio * sigma of the
    population of mean distances.  Clouds with N <= k pass through
    unchanged.  Survivors keep their input order.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if std_ratio <= 0:
        raise ValueError(f"std_ratio must be positive, got {std_ratio}")
    n = len(cloud)
    if n <= k:
        return cloud
    md = mean_knn_distance(cloud.points, k)
    threshold = md.mean() + std_ratio * md.std()
    return cloud.select(md <= threshold)


_BRUTE_FORCE_LIMIT = 2000


def mean_knn_distance(points, k):
    """Mean distance from each point to its k nearest neighbors (exact).

    Small clouds use direct pairwise distances; larger ones a k-d tree.
    A point is never its own neighbor, but duplicates of it are.
    """
    if len(points) <= _BRUTE_FORCE_LIMIT:
        return _mean_knn_pairwise(points, k)
    dist, _ = cKDTree(points).query(points, k=k + 1, workers=1)
    return dist[:, 1:].mean(axis=1)


def _mean_knn_pairwise(points, k, chunk=512):
    n = len(points)
    out = np.empty(n)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        d2 = ((points[lo:hi, None, :] - points[None, :, :]) ** 2).sum(axis=2)
        d2[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        kth = np.partition(d2, k - 1, axis=1)[:, :k]
        out[lo:hi] = np.sqrt(kth).mean(axis=1)
    return out
