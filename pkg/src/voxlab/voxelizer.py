"""Thresholded majority-vote voxelization of labeled point clouds."""

import json
from dataclasses import dataclass, field

import numpy as np

from . import tensorio
from .pointcloud import EMPTY_CLASS, NUM_CLASSES

_DIVISIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned voxel grid over half-open intervals [min, max).

    The extent must divide evenly by the voxel size (within 1e-9).  Point
    binning multiplies by the precomputed reciprocal of the voxel size, so
    lattice coordinates such as 0.0 land in the voxel real-valued
    arithmetic would give despite 0.4 not being representable.
    """

    minimum: tuple
    maximum: tuple
    voxel_size: float
    dims: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "minimum", tuple(float(x) for x in self.minimum))
        object.__setattr__(self, "maximum", tuple(float(x) for x in self.maximum))
        object.__setattr__(self, "voxel_size", float(self.voxel_size))
        if self.voxel_size <= 0:
            raise ValueError(f"voxel size must be positive, got {self.voxel_size}")
        dims = []
        for lo, hi in zip(self.minimum, self.maximum):
            span = hi - lo
            if span <= 0:
                raise ValueError(f"empty extent [{lo}, {hi})")
            n = int(round(span / self.voxel_size))
            if n < 1 or abs(span - n * self.voxel_size) > _DIVISIBILITY_TOL:
                raise ValueError(
                    f"extent [{lo}, {hi}) is not a whole number of {self.voxel_size} voxels"
                )
            dims.append(n)
        object.__setattr__(self, "dims", tuple(dims))

    @classmethod
    def default(cls):
        return cls((-40.0, -40.0, -1.0), (40.0, 40.0, 5.4), 0.4)

    @property
    def voxel_count(self):
        nx, ny, nz = self.dims
        return nx * ny * nz

    def centers_axis(self, axis):
        lo = self.minimum[axis]
        return lo + (np.arange(self.dims[axis]) + 0.5) * self.voxel_size

    def to_dict(self):
        return {
            "min": list(self.minimum),
            "max": list(self.maximum),
            "voxel_size": self.voxel_size,
            "dims": list(self.dims),
        }

    @classmethod
    def from_dict(cls, doc):
        spec = cls(doc["min"], doc["max"], doc["voxel_size"])
        if "dims" in doc and tuple(doc["dims"]) != spec.dims:
            raise ValueError(f"declared dims {doc['dims']} do not match derived {spec.dims}")
        return spec


def voxel_index(spec, point):
    """Map one point to its (ix, iy, iz) voxel, or None when outside.

    Points exactly on the lower boundary are inside, points exactly on the
    upper boundary are outside.
    """
    idx = []
    for axis in range(3):
        i = int(np.floor((point[axis] - spec.minimum[axis]) * (1.0 / spec.voxel_size)))
        if not 0 <= i < spec.dims[axis]:
            return None
        idx.append(i)
    return tuple(idx)


def voxel_indices(spec, points):
    """Vectorized binning: returns ((N, 3) int indices, (N,) inside mask)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    minimum = np.asarray(spec.minimum)
    inv = 1.0 / spec.voxel_size
    idx = np.floor((points - minimum) * inv).astype(np.int64)
    dims = np.asarray(spec.dims)
    inside = np.all((idx >= 0) & (idx < dims), axis=1)
    return idx, inside


@dataclass
class LabelGrid:
    """Dense uint8 class-label grid of shape (Nx, Ny, Nz); 17 means empty."""

    spec: GridSpec
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.uint8)
        if self.data.shape != self.spec.dims:
            raise ValueError(f"grid shape {self.data.shape} does not match spec dims {self.spec.dims}")
        if np.any(self.data >= NUM_CLASSES):
            raise ValueError("grid labels must be < 18")

    @classmethod
    def empty(cls, spec):
        return cls(spec, np.full(spec.dims, EMPTY_CLASS, dtype=np.uint8))


def voxelize(cloud, spec, threshold=10):
    """Vote point labels into a grid.

    A voxel containing at least ``threshold`` points takes its most frequent
    point label, ties going to the smallest class index; all other voxels
    are empty.  Points outside the grid are dropped silently.  The result
    does not depend on point order.
    """
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")
    grid = LabelGrid.empty(spec)
    if len(cloud) == 0:
        return grid
    idx, inside = voxel_indices(spec, cloud.points)
    if not np.any(inside):
        return grid
    idx = idx[inside]
    labels = cloud.labels[inside].astype(np.int64)
    nx, ny, nz = spec.dims
    lin = (idx[:, 0] * ny + idx[:, 1]) * nz + idx[:, 2]

    keys, counts = np.unique(lin * NUM_CLASSES + labels, return_counts=True)
    vox = keys // NUM_CLASSES
    cls = keys % NUM_CLASSES
    starts = np.flatnonzero(np.r_[True, vox[1:] != vox[:-1]])
    sizes = np.diff(np.append(starts, len(keys)))
    totals = np.add.reduceat(counts, starts)
    group_max = np.maximum.reduceat(counts, starts)
    # Keys are sorted, so within a voxel the classes appear in ascending
    # order; the first count equal to the group maximum is the tie winner.
    is_max = counts == np.repeat(group_max, sizes)
    position = np.where(is_max, np.arange(len(counts)), len(counts))
    winner = np.minimum.reduceat(position, starts)
    occupied = totals >= threshold
    grid.data.reshape(-1)[vox[starts][occupied]] = cls[winner[occupied]].astype(np.uint8)
    return grid


def occupied_count(grid):
    return int(np.count_nonzero(grid.data != EMPTY_CLASS))


def save_label_grid(grid, tensor_path, spec_path):
    """Write the grid as a VXT1 uint8 tensor plus a JSON sidecar of its geometry."""
    tensorio.write_tensor(tensor_path, grid.data)
    with open(spec_path, "w") as fh:
        json.dump(grid.spec.to_dict(), fh, indent=2)
        fh.write("\n")


def load_label_grid(tensor_path, spec_path):
    with open(spec_path) as fh:
        spec = GridSpec.from_dict(json.load(fh))
    data = tensorio.read_tensor(tensor_path)
    if data.dtype != np.uint8:
        raise ValueError(f"label grid {tensor_path} must be uint8, got {data.dtype}")
    return LabelGrid(spec, data)
