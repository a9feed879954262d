"""voxlab: semantic occupancy pseudo-labels from surround cameras.

The package lifts per-camera depth and semantics into labeled point
clouds, densifies them over time, votes them into voxel grids, and scores
those grids against references, with camera-visibility masking and a
verified reference implementation of the training losses.
"""

from .geometry import Intrinsics, RigidTransform, compose, project_point, unproject_pixel
from .losses import LossBreakdown, pseudo_loss, pseudo_loss_grad
from .metrics import ConfusionAccumulator, EvalReport, accumulate, finalize
from .pipeline import PipelineConfig
from .pointcloud import (CameraSample, LabelSpace, SemanticPointCloud,
                         default_label_space, lift_camera, merge_cameras,
                         remove_outliers)
from .temporal import SequenceContext, densify, filter_dynamic
from .visibility import CameraMask, compute_mask, mask_count
from .voxelizer import GridSpec, LabelGrid, occupied_count, voxel_index, voxelize

__version__ = "0.1.0"

__all__ = [
    "CameraMask", "CameraSample", "ConfusionAccumulator", "EvalReport",
    "GridSpec", "Intrinsics", "LabelGrid", "LabelSpace", "LossBreakdown",
    "PipelineConfig", "RigidTransform", "SemanticPointCloud",
    "SequenceContext", "accumulate", "compose", "compute_mask",
    "default_label_space", "densify", "filter_dynamic", "finalize",
    "lift_camera", "mask_count", "merge_cameras", "occupied_count",
    "project_point", "pseudo_loss", "pseudo_loss_grad", "remove_outliers",
    "unproject_pixel", "voxel_index", "voxelize",
]
