"""Temporal densification: merging past observations into the current frame.

History clouds contribute only their static-class points, because dynamic
objects have moved since they were observed; the current cloud keeps all
its points.  The merged cloud is then expressed in the current ego frame.
"""

from collections import deque

import numpy as np

from .pointcloud import SemanticPointCloud, merge_cameras


def filter_dynamic(cloud, space):
    """Drop every point whose label is in the dynamic set."""
    if not space.dynamic_set:
        return cloud
    dynamic = np.zeros(256, dtype=bool)
    dynamic[list(space.dynamic_set)] = True
    return cloud.select(~dynamic[cloud.labels])


def densify(current, history, T_global_to_ego, space):
    """Merge the current global-frame cloud with dynamic-filtered history
    and map the union into the ego frame.

    ``history`` is ordered nearest-past first; its clouds are re-stamped
    -1, -2, ... and the current cloud 0.
    """
    parts = [current.with_stamp(0)]
    for age, cloud in enumerate(history, start=1):
        parts.append(filter_dynamic(cloud, space).with_stamp(-age))
    return merge_cameras(parts).transformed(T_global_to_ego)


class SequenceContext:
    """Sliding window over an ordered sequence of global-frame clouds.

    Holds at most ``max_history`` predecessors of the latest sample; the
    caller pushes samples in sequence order.
    """

    def __init__(self, max_history=13):
        if max_history < 0:
            raise ValueError(f"max_history must be >= 0, got {max_history}")
        self.max_history = max_history
        self._window = deque(maxlen=max_history + 1)

    def push(self, sample_id, cloud, T_global_to_ego):
        self._window.append((sample_id, cloud, T_global_to_ego))

    @property
    def history_length(self):
        return max(0, len(self._window) - 1)

    def densify_latest(self, space):
        """Densified ego-frame cloud for the most recently pushed sample."""
        if not self._window:
            raise ValueError("no samples pushed")
        sample_id, current, T_global_to_ego = self._window[-1]
        history = [entry[1] for entry in reversed(list(self._window)[:-1])]
        return densify(current, history, T_global_to_ego, space)
