"""Occupancy-grid evaluation: per-class IoU, mean IoU, binary occupancy IoU.

Counts are accumulated across samples first and turned into percentages
once at the end, so the aggregate is a dataset-level score rather than an
average of per-sample scores.
"""

from dataclasses import dataclass, field

import numpy as np

from .pointcloud import EMPTY_CLASS, NUM_CLASSES

# Classes conventionally shown in result tables: everything except the
# catch-all class 0, other_flat (12), and empty (17).
TABLE_CLASSES = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 13, 14, 15, 16)


@dataclass
class ConfusionAccumulator:
    tp: np.ndarray = field(default_factory=lambda: np.zeros(NUM_CLASSES, dtype=np.int64))
    fp: np.ndarray = field(default_factory=lambda: np.zeros(NUM_CLASSES, dtype=np.int64))
    fn: np.ndarray = field(default_factory=lambda: np.zeros(NUM_CLASSES, dtype=np.int64))
    occ_tp: int = 0
    occ_fp: int = 0
    occ_fn: int = 0
    evaluated: int = 0

    def __add__(self, other):
        merged = ConfusionAccumulator(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn,
            self.occ_tp + other.occ_tp, self.occ_fp + other.occ_fp,
            self.occ_fn + other.occ_fn, self.evaluated + other.evaluated,
        )
        return merged


def _as_array(obj):
    """Unwrap grid/mask wrapper objects carrying ndarray payloads in ``.data``.

    Plain ndarrays pass through untouched (their ``.data`` is a memoryview,
    not the payload).
    """
    if isinstance(obj, np.ndarray):
        return obj
    data = getattr(obj, "data", None)
    if isinstance(data, np.ndarray):
        return data
    return np.asarray(obj)


def accumulate(pred, gt, mask=None, acc=None):
    """Add one grid pair (optionally restricted to ``mask``) into ``acc``.

    ``pred`` and ``gt`` may be LabelGrid instances or plain uint8 arrays of
    equal shape.  Returns the accumulator.
    """
    pred_data = _as_array(pred)
    gt_data = _as_array(gt)
    if pred_data.shape != gt_data.shape:
        raise ValueError(f"grid shapes differ: {pred_data.shape} vs {gt_data.shape}")
    if mask is not None:
        mask_data = _as_array(mask).astype(bool)
        if mask_data.shape != gt_data.shape:
            raise ValueError(f"mask shape {mask_data.shape} does not match grids {gt_data.shape}")
        p = pred_data[mask_data].astype(np.int64)
        g = gt_data[mask_data].astype(np.int64)
    else:
        p = pred_data.reshape(-1).astype(np.int64)
        g = gt_data.reshape(-1).astype(np.int64)
    if acc is None:
        acc = ConfusionAccumulator()

    confusion = np.bincount(g * NUM_CLASSES + p, minlength=NUM_CLASSES * NUM_CLASSES)
    confusion = confusion.reshape(NUM_CLASSES, NUM_CLASSES)
    diag = np.diag(confusion)
    acc.tp += diag
    acc.fn += confusion.sum(axis=1) - diag
    acc.fp += confusion.sum(axis=0) - diag

    occ_p = p != EMPTY_CLASS
    occ_g = g != EMPTY_CLASS
    acc.occ_tp += int(np.count_nonzero(occ_p & occ_g))
    acc.occ_fp += int(np.count_nonzero(occ_p & ~occ_g))
    acc.occ_fn += int(np.count_nonzero(~occ_p & occ_g))
    acc.evaluated += p.size
    return acc


@dataclass
class EvalReport:
    """Finalized scores, all IoU values as percentages.

    ``miou`` averages classes 0-16 that actually occur (zero-denominator
    classes are excluded); ``miou_strict`` divides by 17 regardless;
    ``miou_table`` averages the 15 table classes that occur.  Class 17 is
    reported in ``per_class_iou`` but never averaged.
    """

    iou: float
    miou: float
    per_class_iou: np.ndarray
    evaluated_voxel_count: int
    miou_strict: float
    miou_table: float
    class_present: np.ndarray

    def to_dict(self, names=None):
        doc = {
            "iou": round(self.iou, 2),
            "miou": round(self.miou, 2),
            "miou_strict": round(self.miou_strict, 2),
            "miou_table": round(self.miou_table, 2),
            "evaluated_voxel_count": self.evaluated_voxel_count,
        }
        keys = names if names is not None else [f"class_{i}" for i in range(NUM_CLASSES)]
        doc["per_class_iou"] = {
            key: round(float(v), 2) for key, v in zip(keys, self.per_class_iou)
        }
        return doc


def finalize(acc):
    """Turn accumulated counts into an EvalReport."""
    denom = acc.tp + acc.fp + acc.fn
    present = denom > 0
    per_class = np.zeros(NUM_CLASSES)
    per_class[present] = 100.0 * acc.tp[present] / denom[present]

    semantic = present.copy()
    semantic[EMPTY_CLASS] = False
    miou = float(per_class[semantic].mean()) if np.any(semantic) else 0.0
    miou_strict = float(per_class[:EMPTY_CLASS].sum() / (NUM_CLASSES - 1))
    table = np.zeros(NUM_CLASSES, dtype=bool)
    table[list(TABLE_CLASSES)] = True
    table &= present
    miou_table = float(per_class[table].mean()) if np.any(table) else 0.0

    occ_denom = acc.occ_tp + acc.occ_fp + acc.occ_fn
    iou = 100.0 * acc.occ_tp / occ_denom if occ_denom > 0 else 0.0
    return EvalReport(float(iou), miou, per_class, acc.evaluated,
                      miou_strict, miou_table, present)


def evaluate_pair(pred, gt, mask=None):
    return finalize(accumulate(pred, gt, mask))


def compare_masked_unmasked(pred, gt, mask):
    """Evaluate one grid pair with and without the visibility mask."""
    return evaluate_pair(pred, gt, mask), evaluate_pair(pred, gt, None)


def csv_header(names):
    return ["sample_id", "iou", "miou"] + list(names) + ["evaluated_voxel_count"]


def csv_row(sample_id, report):
    cells = [sample_id, f"{report.iou:.2f}", f"{report.miou:.2f}"]
    cells += [f"{v:.2f}" for v in report.per_class_iou]
    cells.append(str(report.evaluated_voxel_count))
    return cells
