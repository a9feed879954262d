"""End-to-end pipeline: configuration, generation, evaluation, sweeps.

Commands are deterministic: given the same configuration and inputs they
rewrite byte-identical outputs, including under per-sample parallelism.
"""

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

from . import dataset, metrics, tensorio
from .geometry import compose
from .losses import gradient_check, pseudo_loss
from .pointcloud import (LabelSpace, default_label_space, lift_camera,
                         merge_cameras, remove_outliers)
from .temporal import SequenceContext
from .visibility import compute_mask, load_mask, mask_count, save_mask
from .voxelizer import GridSpec, load_label_grid, occupied_count, save_label_grid, voxelize

THRESHOLD_SWEEP = range(1, 26)
HISTORY_SWEEP = range(0, 14)


@dataclass
class PipelineConfig:
    grid_min: tuple = (-40.0, -40.0, -1.0)
    grid_max: tuple = (40.0, 40.0, 5.4)
    voxel_size: float = 0.4
    threshold: int = 10
    history: int = 13
    outlier_k: int = 20
    outlier_std_ratio: float = 2.0
    dynamic_set: tuple = None
    stride: int = 1
    ray_stride: int = 4
    lam: float = 0.1
    ignore_empty: bool = True
    workers: int = 1

    def __post_init__(self):
        self.grid_min = tuple(float(v) for v in self.grid_min)
        self.grid_max = tuple(float(v) for v in self.grid_max)
        if self.dynamic_set is not None:
            self.dynamic_set = tuple(sorted(int(c) for c in self.dynamic_set))
        if self.threshold < 1:
            raise ValueError(f"threshold must be >= 1, got {self.threshold}")
        if not 0 <= self.history <= 13:
            raise ValueError(f"history must be in [0, 13], got {self.history}")
        if self.outlier_k < 1:
            raise ValueError(f"outlier_k must be >= 1, got {self.outlier_k}")
        if self.outlier_std_ratio <= 0:
            raise ValueError(f"outlier_std_ratio must be positive, got {self.outlier_std_ratio}")
        if self.stride < 1 or self.ray_stride < 1:
            raise ValueError("stride and ray_stride must be >= 1")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    @classmethod
    def from_dict(cls, doc):
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def grid_spec(self):
        return GridSpec(self.grid_min, self.grid_max, self.voxel_size)

    def label_space(self):
        if self.dynamic_set is None:
            return default_label_space()
        return LabelSpace(dynamic_set=frozenset(self.dynamic_set))


@dataclass
class SampleStats:
    sample_id: str
    points_before: int
    points_after: int
    densified_points: int
    occupied_voxels: int


def _prepare_one(args):
    input_dir, sample_id, stride, outlier_k, outlier_std_ratio = args
    cameras, T_global_to_ego = dataset.read_sample(input_dir, sample_id)
    merged = merge_cameras(lift_camera(cam, stride) for cam in cameras)
    cleaned = remove_outliers(merged, outlier_k, outlier_std_ratio)
    return sample_id, cleaned, T_global_to_ego, len(merged)


def prepare_clouds(input_dir, config):
    """Lift, merge, and de-outlier every sample of the sequence.

    Returns a list of (sample_id, global-frame cloud, T_global_to_ego,
    merged point count) in manifest order.  This is the cached stage the
    sweep commands reuse.
    """
    sample_ids = dataset.read_manifest(input_dir)
    jobs = [(input_dir, sid, config.stride, config.outlier_k, config.outlier_std_ratio)
            for sid in sample_ids]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(_prepare_one, jobs))
    return [_prepare_one(job) for job in jobs]


def densified_clouds(prepared, config):
    """Yield (sample_id, ego-frame densified cloud) for every sample."""
    space = config.label_space()
    context = SequenceContext(max_history=config.history)
    for sample_id, cloud, T_global_to_ego, _ in prepared:
        context.push(sample_id, cloud, T_global_to_ego)
        yield sample_id, context.densify_latest(space)


def generate(input_dir, output_dir, config):
    """Run the full pseudo-label pipeline over a sequence directory."""
    os.makedirs(output_dir, exist_ok=True)
    spec = config.grid_spec()
    prepared = prepare_clouds(input_dir, config)
    stats = []
    for (sample_id, cloud, _, before), (_, dense) in zip(
            prepared, densified_clouds(prepared, config)):
        grid = voxelize(dense, spec, config.threshold)
        save_label_grid(grid, dataset.labels_path(output_dir, sample_id),
                        dataset.gridspec_path(output_dir, sample_id))
        stats.append(SampleStats(sample_id, before, len(cloud), len(dense),
                                 occupied_count(grid)))
    _write_generate_csv(os.path.join(output_dir, "summary.csv"), stats)
    return stats


def _write_generate_csv(path, stats):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "points_before", "points_after",
                         "densified_points", "occupied_voxels"])
        for s in stats:
            writer.writerow([s.sample_id, s.points_before, s.points_after,
                             s.densified_points, s.occupied_voxels])


def _load_grid_pair(pred_dir, gt_dir, sample_id):
    pred = load_label_grid(dataset.labels_path(pred_dir, sample_id),
                           dataset.gridspec_path(pred_dir, sample_id))
    gt = load_label_grid(dataset.labels_path(gt_dir, sample_id),
                         dataset.gridspec_path(gt_dir, sample_id))
    if pred.spec != gt.spec:
        raise ValueError(f"sample {sample_id}: prediction and reference grids disagree")
    return pred, gt


def _sample_ids_from_grids(directory):
    suffix = "__labels.vxt"
    ids = sorted(name[:-len(suffix)] for name in os.listdir(directory)
                 if name.endswith(suffix))
    if not ids:
        raise ValueError(f"no label grids found in {directory}")
    return ids


def evaluate(pred_dir, gt_dir, mask_dir=None, report_path=None, names=None):
    """Score every prediction grid against its reference grid.

    Returns (per-sample rows, aggregate report); each row is (sample_id,
    EvalReport).  When ``report_path`` is given the rows plus a final
    ``aggregate`` row are written as CSV.
    """
    if names is None:
        names = default_label_space().names
    sample_ids = _sample_ids_from_grids(pred_dir)
    total = metrics.ConfusionAccumulator()
    rows = []
    for sample_id in sample_ids:
        pred, gt = _load_grid_pair(pred_dir, gt_dir, sample_id)
        mask = None
        if mask_dir is not None:
            mask = load_mask(dataset.mask_path(mask_dir, sample_id),
                             dataset.gridspec_path(mask_dir, sample_id))
        acc = metrics.accumulate(pred, gt, mask)
        rows.append((sample_id, metrics.finalize(acc)))
        total = total + acc
    aggregate = metrics.finalize(total)
    if report_path is not None:
        with open(report_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(metrics.csv_header(names))
            for sample_id, report in rows:
                writer.writerow(metrics.csv_row(sample_id, report))
            writer.writerow(metrics.csv_row("aggregate", aggregate))
    return rows, aggregate


def compute_masks(input_dir, grids_dir, output_dir, config):
    """Write a camera-visibility mask per sample.

    Cameras are taken from the input calibration; occupancy comes from the
    grids directory (typically the reference grids).
    """
    os.makedirs(output_dir, exist_ok=True)
    counts = []
    for sample_id in dataset.read_manifest(input_dir):
        cameras, T_global_to_ego = dataset.read_sample(input_dir, sample_id)
        grid = load_label_grid(dataset.labels_path(grids_dir, sample_id),
                               dataset.gridspec_path(grids_dir, sample_id))
        rig = [(cam.intrinsics, compose(T_global_to_ego, cam.camera_to_global))
               for cam in cameras]
        mask = compute_mask(grid, rig, config.ray_stride)
        save_mask(mask, dataset.mask_path(output_dir, sample_id),
                  dataset.gridspec_path(output_dir, sample_id))
        counts.append((sample_id, mask_count(mask)))
    return counts


def sweep_threshold(input_dir, gt_dir, config):
    """Aggregate scores for every occupancy threshold from 1 to 25.

    The lifted clouds are prepared once and re-voxelized per threshold.
    Rows are (threshold, miou, iou, occupied_count).
    """
    spec = config.grid_spec()
    prepared = prepare_clouds(input_dir, config)
    dense = list(densified_clouds(prepared, config))
    gt_grids = {sid: load_label_grid(dataset.labels_path(gt_dir, sid),
                                     dataset.gridspec_path(gt_dir, sid))
                for sid, _ in dense}
    rows = []
    for threshold in THRESHOLD_SWEEP:
        total = metrics.ConfusionAccumulator()
        occupied = 0
        for sample_id, cloud in dense:
            grid = voxelize(cloud, spec, threshold)
            occupied += occupied_count(grid)
            metrics.accumulate(grid, gt_grids[sample_id], None, total)
        report = metrics.finalize(total)
        rows.append((threshold, report.miou, report.iou, occupied))
    return rows


def sweep_temporal(input_dir, gt_dir, config):
    """Aggregate mIoU for every history depth from 0 to 13.

    Requires a sequence long enough that the deepest history is actually
    reachable.  Rows are (history, miou).
    """
    sample_ids = dataset.read_manifest(input_dir)
    max_history = max(HISTORY_SWEEP)
    if len(sample_ids) <= max_history:
        raise ValueError(
            f"sequence of {len(sample_ids)} samples cannot exercise history {max_history}"
        )
    spec = config.grid_spec()
    prepared = prepare_clouds(input_dir, config)
    gt_grids = {sid: load_label_grid(dataset.labels_path(gt_dir, sid),
                                     dataset.gridspec_path(gt_dir, sid))
                for sid in sample_ids}
    rows = []
    for history in HISTORY_SWEEP:
        cfg = replace(config, history=history)
        total = metrics.ConfusionAccumulator()
        for sample_id, cloud in densified_clouds(prepared, cfg):
            grid = voxelize(cloud, spec, cfg.threshold)
            metrics.accumulate(grid, gt_grids[sample_id], None, total)
        rows.append((history, metrics.finalize(total).miou))
    return rows


def loss_check(logits_path, target_path, lam=0.1, ignore_empty=True, grad=False):
    """Score a logits tensor against a label grid tensor.

    Returns the loss breakdown as a dict; with ``grad`` the maximum
    relative error of the analytic gradient against finite differences is
    included as ``grad_error``.
    """
    logits = tensorio.read_tensor(logits_path)
    target = tensorio.read_tensor(target_path)
    if logits.ndim != target.ndim + 1:
        raise ValueError(
            f"logits rank {logits.ndim} does not extend target rank {target.ndim}"
        )
    if logits.shape[1:] != target.shape:
        raise ValueError(
            f"logits spatial shape {logits.shape[1:]} does not match target {target.shape}"
        )
    result = pseudo_loss(logits, target, lam, ignore_empty).to_dict()
    if grad:
        result["grad_error"] = gradient_check(logits, target, lam, ignore_empty)
    return result
