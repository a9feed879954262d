import numpy as np
import pytest

from voxlab.geometry import RigidTransform
from voxlab.pointcloud import SemanticPointCloud, default_label_space
from voxlab.temporal import SequenceContext, densify, filter_dynamic


def labeled(points, label):
    points = np.atleast_2d(points)
    return SemanticPointCloud(points, np.full(len(points), label, np.uint8))


class TestFilterDynamic:
    def test_drops_vehicles_keeps_surfaces(self, rng):
        space = default_label_space()
        labels = np.array([4, 11, 7, 13, 10, 15], dtype=np.uint8)
        cloud = SemanticPointCloud(rng.normal(size=(6, 3)), labels)
        kept = filter_dynamic(cloud, space)
        np.testing.assert_array_equal(kept.labels, [11, 13, 15])

    def test_static_only_cloud_unchanged(self, rng):
        space = default_label_space()
        cloud = SemanticPointCloud(rng.normal(size=(8, 3)),
                                   np.full(8, 16, np.uint8))
        assert len(filter_dynamic(cloud, space)) == 8

    def test_every_dynamic_class_dropped(self, rng):
        space = default_label_space()
        for cls in sorted(space.dynamic_set):
            cloud = labeled(rng.normal(size=(3, 3)), cls)
            assert len(filter_dynamic(cloud, space)) == 0

    def test_empty_cloud(self):
        space = default_label_space()
        assert len(filter_dynamic(SemanticPointCloud.empty(), space)) == 0


class TestDensify:
    def test_current_keeps_dynamic_history_does_not(self):
        space = default_label_space()
        current = labeled([[1.0, 0, 0], [2.0, 0, 0]], 4)        # cars, kept
        past = labeled([[3.0, 0, 0]], 4)                        # car, dropped
        past_static = labeled([[4.0, 0, 0]], 11)                # road, kept
        out = densify(current, [past, past_static],
                      RigidTransform.identity(), space)
        assert len(out) == 3
        np.testing.assert_array_equal(sorted(out.labels), [4, 4, 11])
        assert not np.any(np.isclose(out.points[:, 0], 3.0))

    def test_stamps_mark_age(self):
        space = default_label_space()
        current = labeled([[0.0, 0, 0]], 11)
        h1 = labeled([[1.0, 0, 0]], 11)
        h2 = labeled([[2.0, 0, 0]], 11)
        out = densify(current, [h1, h2], RigidTransform.identity(), space)
        by_x = {round(p[0]): s for p, s in zip(out.points, out.stamp)}
        assert by_x == {0: 0, 1: -1, 2: -2}

    def test_result_in_ego_frame(self):
        space = default_label_space()
        current = labeled([[10.0, 5.0, 0.0]], 11)
        to_ego = RigidTransform(np.eye(3), np.array([-10.0, -5.0, 0.0]))
        out = densify(current, [], to_ego, space)
        np.testing.assert_allclose(out.points[0], [0.0, 0.0, 0.0], atol=1e-12)

    def test_static_wall_coincides_across_poses(self):
        # A wall seen from three ego positions lands on the same global
        # surface; after densification into the last ego frame the three
        # copies of each wall point coincide to within float round-off.
        space = default_label_space()
        wall_global = np.array([[5.0, y * 0.5, 1.0] for y in range(-4, 5)])
        snapshots = [labeled(wall_global.copy(), 15) for _ in range(3)]
        to_ego = RigidTransform(np.eye(3), np.array([-2.0, 0.0, 0.0]))
        out = densify(snapshots[-1], snapshots[:-1], to_ego, space)
        assert len(out) == 3 * len(wall_global)
        expected = wall_global + [-2.0, 0.0, 0.0]
        for stamp in (0, -1, -2):
            got = out.points[out.stamp == stamp]
            np.testing.assert_allclose(np.sort(got, axis=0),
                                       np.sort(expected, axis=0), atol=1e-5)

    def test_densified_count_formula(self, rng):
        # N_current + sum of static points per history frame.
        space = default_label_space()
        current = SemanticPointCloud(rng.normal(size=(50, 3)),
                                     rng.integers(0, 17, 50).astype(np.uint8))
        history = []
        static_total = 0
        for _ in range(4):
            labels = rng.integers(0, 17, 30).astype(np.uint8)
            history.append(SemanticPointCloud(rng.normal(size=(30, 3)), labels))
            static_total += int(np.sum(~np.isin(labels, list(space.dynamic_set))))
        out = densify(current, history, RigidTransform.identity(), space)
        assert len(out) == 50 + static_total


class TestSequenceContext:
    def test_window_capped_at_max_history(self):
        space = default_label_space()
        ctx = SequenceContext(max_history=2)
        for i in range(6):
            ctx.push(f"s{i}", labeled([[float(i), 0, 0]], 11),
                     RigidTransform.identity())
        assert ctx.history_length == 2
        out = ctx.densify_latest(space)
        np.testing.assert_array_equal(sorted(out.points[:, 0]), [3.0, 4.0, 5.0])

    def test_zero_history(self):
        space = default_label_space()
        ctx = SequenceContext(max_history=0)
        ctx.push("a", labeled([[1.0, 0, 0]], 11), RigidTransform.identity())
        ctx.push("b", labeled([[2.0, 0, 0]], 11), RigidTransform.identity())
        out = ctx.densify_latest(space)
        assert len(out) == 1
        assert out.points[0, 0] == 2.0

    def test_history_ordered_nearest_first(self):
        space = default_label_space()
        ctx = SequenceContext(max_history=3)
        for i in range(4):
            ctx.push(f"s{i}", labeled([[float(i), 0, 0]], 11),
                     RigidTransform.identity())
        out = ctx.densify_latest(space)
        by_x = {round(p[0]): s for p, s in zip(out.points, out.stamp)}
        assert by_x == {3: 0, 2: -1, 1: -2, 0: -3}

    def test_empty_context_raises(self):
        with pytest.raises(ValueError, match="pushed"):
            SequenceContext().densify_latest(default_label_space())

    def test_negative_history_rejected(self):
        with pytest.raises(ValueError, match="max_history"):
            SequenceContext(max_history=-1)
