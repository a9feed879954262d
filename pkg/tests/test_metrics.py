from fractions import Fraction

import numpy as np
import pytest

from voxlab.metrics import (TABLE_CLASSES, ConfusionAccumulator, accumulate,
                            compare_masked_unmasked, csv_header, csv_row,
                            evaluate_pair, finalize)
from voxlab.pointcloud import default_label_space


def oracle_scores(pred, gt, mask=None):
    """Element-by-element Python-loop oracle with exact rational arithmetic."""
    tp = [0] * 18
    fp = [0] * 18
    fn = [0] * 18
    occ_tp = occ_fp = occ_fn = evaluated = 0
    flat_pred = pred.reshape(-1)
    flat_gt = gt.reshape(-1)
    flat_mask = None if mask is None else mask.reshape(-1)
    for i in range(flat_gt.size):
        if flat_mask is not None and not flat_mask[i]:
            continue
        p, g = int(flat_pred[i]), int(flat_gt[i])
        evaluated += 1
        if p == g:
            tp[g] += 1
        else:
            fp[p] += 1
            fn[g] += 1
        if p != 17 and g != 17:
            occ_tp += 1
        elif p != 17:
            occ_fp += 1
        elif g != 17:
            occ_fn += 1

    per_class = []
    for c in range(18):
        denom = tp[c] + fp[c] + fn[c]
        per_class.append(Fraction(100 * tp[c], denom) if denom else None)
    semantic = [per_class[c] for c in range(17) if per_class[c] is not None]
    miou = sum(semantic) / len(semantic) if semantic else Fraction(0)
    occ_denom = occ_tp + occ_fp + occ_fn
    iou = Fraction(100 * occ_tp, occ_denom) if occ_denom else Fraction(0)
    return {
        "per_class": per_class,
        "miou": miou,
        "iou": iou,
        "evaluated": evaluated,
        "miou_strict": sum(p for p in per_class[:17] if p is not None) / 17,
    }


def assert_matches_oracle(report, oracle):
    assert report.evaluated_voxel_count == oracle["evaluated"]
    np.testing.assert_allclose(report.iou, float(oracle["iou"]), atol=1e-9)
    np.testing.assert_allclose(report.miou, float(oracle["miou"]), atol=1e-9)
    np.testing.assert_allclose(report.miou_strict, float(oracle["miou_strict"]),
                               atol=1e-9)
    for c in range(18):
        expected = oracle["per_class"][c]
        if expected is None:
            assert report.per_class_iou[c] == 0.0
            assert not report.class_present[c]
        else:
            np.testing.assert_allclose(report.per_class_iou[c], float(expected),
                                       atol=1e-9)


class TestHandCases:
    def test_four_voxel_example(self):
        gt = np.array([4, 4, 11, 17], dtype=np.uint8)
        pred = np.array([4, 11, 11, 17], dtype=np.uint8)
        report = evaluate_pair(pred, gt)
        # car: tp=1 fn=1 -> 50; road: tp=1 fp=1 -> 50; empty: tp=1 -> 100.
        assert report.per_class_iou[4] == pytest.approx(50.0)
        assert report.per_class_iou[11] == pytest.approx(50.0)
        assert report.per_class_iou[17] == pytest.approx(100.0)
        assert report.miou == pytest.approx(50.0)
        assert report.iou == pytest.approx(100.0)
        assert report.evaluated_voxel_count == 4

    def test_identity_is_exactly_hundred(self, rng):
        grid = rng.integers(0, 18, size=(9, 9, 4)).astype(np.uint8)
        report = evaluate_pair(grid, grid)
        assert report.iou == 100.0
        assert report.miou == 100.0
        row = csv_row("s", report)
        assert row[1] == "100.00"
        assert row[2] == "100.00"

    def test_all_empty_pair(self):
        grid = np.full((4, 4, 2), 17, dtype=np.uint8)
        report = evaluate_pair(grid, grid)
        assert report.iou == 0.0       # no occupied voxels anywhere
        assert report.miou == 0.0      # no semantic class present
        assert report.per_class_iou[17] == pytest.approx(100.0)

    def test_absent_class_excluded_but_strict_divides_by_17(self):
        gt = np.array([4, 4], dtype=np.uint8)
        pred = np.array([4, 4], dtype=np.uint8)
        report = evaluate_pair(pred, gt)
        assert report.miou == pytest.approx(100.0)
        assert report.miou_strict == pytest.approx(100.0 / 17)

    def test_empty_class_never_in_miou(self):
        gt = np.array([17, 17, 4], dtype=np.uint8)
        pred = np.array([17, 17, 4], dtype=np.uint8)
        report = evaluate_pair(pred, gt)
        assert report.miou == pytest.approx(100.0)

    def test_table_classes(self):
        assert 0 not in TABLE_CLASSES
        assert 12 not in TABLE_CLASSES
        assert 17 not in TABLE_CLASSES
        assert len(TABLE_CLASSES) == 15


class TestOracle:
    def test_random_grids(self, rng):
        for _ in range(25):
            shape = tuple(rng.integers(2, 7, size=3))
            gt = rng.integers(0, 18, size=shape).astype(np.uint8)
            pred = rng.integers(0, 18, size=shape).astype(np.uint8)
            assert_matches_oracle(evaluate_pair(pred, gt), oracle_scores(pred, gt))

    def test_random_grids_masked(self, rng):
        for _ in range(25):
            shape = tuple(rng.integers(2, 7, size=3))
            gt = rng.integers(0, 18, size=shape).astype(np.uint8)
            pred = rng.integers(0, 18, size=shape).astype(np.uint8)
            mask = rng.random(size=shape) < 0.6
            assert_matches_oracle(evaluate_pair(pred, gt, mask),
                                  oracle_scores(pred, gt, mask))

    def test_sparse_label_subsets(self, rng):
        # Only a few classes present, so most rows of the confusion are zero.
        for _ in range(10):
            classes = rng.choice(18, size=3, replace=False)
            gt = rng.choice(classes, size=(5, 5, 3)).astype(np.uint8)
            pred = rng.choice(classes, size=(5, 5, 3)).astype(np.uint8)
            assert_matches_oracle(evaluate_pair(pred, gt), oracle_scores(pred, gt))


class TestAccumulation:
    def test_accumulate_equals_concatenate(self, rng):
        # Dataset-level counts, not an average of per-sample scores.
        pairs = []
        acc = None
        for _ in range(5):
            gt = rng.integers(0, 18, size=(4, 4, 2)).astype(np.uint8)
            pred = rng.integers(0, 18, size=(4, 4, 2)).astype(np.uint8)
            pairs.append((pred, gt))
            acc = accumulate(pred, gt, acc=acc)
        merged_pred = np.concatenate([p.reshape(-1) for p, _ in pairs])
        merged_gt = np.concatenate([g.reshape(-1) for _, g in pairs])
        got = finalize(acc)
        want = evaluate_pair(merged_pred, merged_gt)
        assert got.iou == want.iou
        assert got.miou == want.miou
        np.testing.assert_array_equal(got.per_class_iou, want.per_class_iou)
        assert got.evaluated_voxel_count == want.evaluated_voxel_count

    def test_accumulator_addition(self, rng):
        gt1 = rng.integers(0, 18, size=60).astype(np.uint8)
        pred1 = rng.integers(0, 18, size=60).astype(np.uint8)
        gt2 = rng.integers(0, 18, size=40).astype(np.uint8)
        pred2 = rng.integers(0, 18, size=40).astype(np.uint8)
        a = accumulate(pred1, gt1)
        b = accumulate(pred2, gt2)
        combined = a + b
        sequential = accumulate(pred2, gt2, acc=accumulate(pred1, gt1))
        np.testing.assert_array_equal(combined.tp, sequential.tp)
        np.testing.assert_array_equal(combined.fp, sequential.fp)
        np.testing.assert_array_equal(combined.fn, sequential.fn)
        assert combined.evaluated == sequential.evaluated == 100

    def test_empty_accumulator_finalizes_to_zero(self):
        report = finalize(ConfusionAccumulator())
        assert report.iou == 0.0
        assert report.miou == 0.0
        assert report.evaluated_voxel_count == 0


class TestMasking:
    def test_mask_restricts_counts(self, rng):
        gt = rng.integers(0, 18, size=(6, 6, 3)).astype(np.uint8)
        pred = gt.copy()
        pred[0, 0, 0] = (gt[0, 0, 0] + 1) % 18
        mask = np.ones_like(gt, dtype=bool)
        mask[0, 0, 0] = False
        masked, unmasked = compare_masked_unmasked(pred, gt, mask)
        assert masked.miou == pytest.approx(100.0)
        assert unmasked.miou < 100.0
        assert masked.evaluated_voxel_count == gt.size - 1
        assert unmasked.evaluated_voxel_count == gt.size

    def test_all_false_mask(self):
        gt = np.zeros((3, 3, 2), dtype=np.uint8)
        report = evaluate_pair(gt, gt, np.zeros_like(gt, dtype=bool))
        assert report.evaluated_voxel_count == 0
        assert report.miou == 0.0

    def test_mask_shape_mismatch(self):
        gt = np.zeros((3, 3, 2), dtype=np.uint8)
        with pytest.raises(ValueError, match="mask"):
            evaluate_pair(gt, gt, np.zeros((2, 2), dtype=bool))

    def test_grid_shape_mismatch(self):
        with pytest.raises(ValueError, match="differ"):
            evaluate_pair(np.zeros((2, 2), np.uint8), np.zeros((3, 3), np.uint8))


class TestCsv:
    def test_header_and_row_shape(self, rng):
        names = default_label_space().names
        header = csv_header(names)
        assert header[0] == "sample_id"
        assert header[-1] == "evaluated_voxel_count"
        assert len(header) == 3 + 18 + 1
        grid = rng.integers(0, 18, size=(4, 4, 2)).astype(np.uint8)
        row = csv_row("sample_0042", evaluate_pair(grid, grid))
        assert len(row) == len(header)
        assert row[0] == "sample_0042"
        assert row[-1] == "32"
        assert all("." in cell for cell in row[1:-1])  # two-decimal strings
