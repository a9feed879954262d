"""Analytic test scenes: exact rendering and exact ground-truth grids.

A scene is a ground plane plus axis-aligned boxes watched by a camera rig
on a moving ego body.  Rendering intersects pixel rays with the scene
analytically, so depth maps are exact to rounding; the ground-truth grid
labels every voxel from the same description by testing voxel centers, so
pipeline output can be scored without any reference data.
"""

import json
from dataclasses import dataclass

import numpy as np

from .geometry import Intrinsics, RigidTransform, compose
from .pointcloud import CameraSample, EMPTY_CLASS
from .voxelizer import LabelGrid

_EPS = 1e-9


@dataclass
class Box:
    center: np.ndarray
    size: np.ndarray
    class_index: int
    dynamic: bool = False
    motion: np.ndarray = None

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.size = np.asarray(self.size, dtype=np.float64).reshape(3)
        if np.any(self.size <= 0):
            raise ValueError(f"box size must be positive, got {self.size.tolist()}")
        if self.motion is not None:
            self.motion = np.asarray(self.motion, dtype=np.float64).reshape(-1, 3)
        if self.dynamic and self.motion is None:
            raise ValueError("dynamic boxes need a motion entry per timestep")

    def corners(self, t):
        center = self.center
        if self.dynamic:
            center = center + self.motion[t]
        half = self.size / 2.0
        return center - half, center + half


@dataclass
class SceneCamera:
    camera_id: str
    intrinsics: Intrinsics
    camera_to_ego: RigidTransform


@dataclass
class SceneSpec:
    ground_z: float
    ground_class: int
    boxes: list
    cameras: list
    ego_to_global: list
    extent: tuple

    def __post_init__(self):
        lo = np.asarray(self.extent[0], dtype=np.float64)
        hi = np.asarray(self.extent[1], dtype=np.float64)
        for box in self.boxes:
            if box.dynamic and len(box.motion) != self.timesteps:
                raise ValueError(
                    f"dynamic box of class {box.class_index} has {len(box.motion)} "
                    f"motion entries for {self.timesteps} timesteps"
                )
            steps = range(self.timesteps) if box.dynamic else [0]
            for t in steps:
                blo, bhi = box.corners(t)
                if np.any(blo < lo) or np.any(bhi > hi):
                    raise ValueError(
                        f"box of class {box.class_index} leaves the world extent at t={t}"
                    )

    @property
    def timesteps(self):
        return len(self.ego_to_global)

    def T_global_to_ego(self, t):
        return self.ego_to_global[t].inverse()

    def to_dict(self):
        return {
            "ground": {"z": self.ground_z, "class_index": self.ground_class},
            "boxes": [
                {
                    "center": box.center.tolist(),
                    "size": box.size.tolist(),
                    "class_index": box.class_index,
                    "dynamic": box.dynamic,
                    "motion": box.motion.tolist() if box.motion is not None else None,
                }
                for box in self.boxes
            ],
            "cameras": [
                {
                    "camera_id": cam.camera_id,
                    "fx": cam.intrinsics.fx, "fy": cam.intrinsics.fy,
                    "cx": cam.intrinsics.cx, "cy": cam.intrinsics.cy,
                    "width": cam.intrinsics.width, "height": cam.intrinsics.height,
                    "T_camera_to_ego": cam.camera_to_ego.to_matrix().reshape(-1).tolist(),
                }
                for cam in self.cameras
            ],
            "ego_to_global": [p.to_matrix().reshape(-1).tolist() for p in self.ego_to_global],
            "extent": [list(self.extent[0]), list(self.extent[1])],
        }

    @classmethod
    def from_dict(cls, doc):
        boxes = [
            Box(b["center"], b["size"], int(b["class_index"]),
                bool(b.get("dynamic", False)), b.get("motion"))
            for b in doc["boxes"]
        ]
        cameras = [
            SceneCamera(
                c["camera_id"],
                Intrinsics(c["fx"], c["fy"], c["cx"], c["cy"], c["width"], c["height"]),
                RigidTransform.from_matrix(np.reshape(c["T_camera_to_ego"], (4, 4))),
            )
            for c in doc["cameras"]
        ]
        poses = [RigidTransform.from_matrix(np.reshape(p, (4, 4)))
                 for p in doc["ego_to_global"]]
        return cls(float(doc["ground"]["z"]), int(doc["ground"]["class_index"]),
                   boxes, cameras, poses,
                   (tuple(doc["extent"][0]), tuple(doc["extent"][1])))


def load_scene(path):
    with open(path) as fh:
        return SceneSpec.from_dict(json.load(fh))


def save_scene(scene, path):
    with open(path, "w") as fh:
        json.dump(scene.to_dict(), fh, indent=2)
        fh.write("\n")


def _ray_box(origin, directions, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = (lo - origin) / directions
        t_hi = (hi - origin) / directions
    zero = directions == 0.0
    inside = (origin >= lo) & (origin <= hi)
    t_lo = np.where(zero, np.where(inside, -np.inf, np.inf), t_lo)
    t_hi = np.where(zero, np.where(inside, np.inf, -np.inf), t_hi)
    t_near = np.minimum(t_lo, t_hi).max(axis=1)
    t_far = np.maximum(t_lo, t_hi).min(axis=1)
    return t_near, t_far


def render_sample(scene, t, camera_index):
    """Render one camera at timestep ``t`` into a CameraSample.

    Depth holds the camera-frame z of the nearest surface, 0 for pixels
    that see nothing; semantics hold the surface class, 17 for misses.
    """
    cam = scene.cameras[camera_index]
    intr = cam.intrinsics
    pose = compose(scene.ego_to_global[t], cam.camera_to_ego)
    uu, vv = np.meshgrid(np.arange(intr.width, dtype=np.float64),
                         np.arange(intr.height, dtype=np.float64))
    dirs_cam = np.stack([
        (uu.reshape(-1) - intr.cx) / intr.fx,
        (vv.reshape(-1) - intr.cy) / intr.fy,
        np.ones(uu.size),
    ], axis=1)
    # The third camera-frame component is 1, so the ray parameter below is
    # exactly the camera-frame depth.
    directions = dirs_cam @ pose.rotation.T
    origin = pose.translation

    best = np.full(len(directions), np.inf)
    label = np.full(len(directions), EMPTY_CLASS, dtype=np.uint8)

    dz = directions[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_plane = (scene.ground_z - origin[2]) / dz
    hit = np.isfinite(t_plane) & (t_plane > _EPS) & (t_plane < best)
    best[hit] = t_plane[hit]
    label[hit] = scene.ground_class

    for box in scene.boxes:
        lo, hi = box.corners(t)
        t_near, t_far = _ray_box(origin, directions, lo, hi)
        hit = (t_near <= t_far) & (t_near > _EPS) & (t_near < best)
        best[hit] = t_near[hit]
        label[hit] = box.class_index

    depth = np.where(np.isfinite(best), best, 0.0).reshape(intr.height, intr.width)
    return CameraSample(cam.camera_id, depth, label.reshape(intr.height, intr.width),
                        intr, pose)


def render_timestep(scene, t):
    return [render_sample(scene, t, i) for i in range(len(scene.cameras))]


def analytic_ground_truth(scene, t, spec):
    """Exact label grid in the ego frame of timestep ``t``.

    A voxel takes the class of the object containing its center: boxes
    beat the ground, the smallest class index wins box overlaps, and the
    ground is the solid half-space at or below its level.
    """
    xs, ys, zs = (spec.centers_axis(a) for a in range(3))
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    centers = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)
    world = scene.ego_to_global[t].apply(centers)

    label = np.full(len(world), EMPTY_CLASS, dtype=np.uint8)
    label[world[:, 2] <= scene.ground_z] = scene.ground_class
    box_label = np.full(len(world), 255, dtype=np.uint8)
    for box in scene.boxes:
        lo, hi = box.corners(t)
        inside = np.all((world >= lo) & (world <= hi), axis=1)
        box_label[inside] = np.minimum(box_label[inside], box.class_index)
    label = np.where(box_label < 255, box_label, label)
    return LabelGrid(spec, label.reshape(spec.dims))


def _rotation_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# Maps camera axes (+x right, +y down, +z forward) onto an ego body whose
# +x points forward and +z up.
_CAMERA_BASE = np.array([
    [0.0, 0.0, 1.0],
    [-1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
])


def camera_rotation(yaw, pitch_down):
    """Camera-to-ego rotation for a camera yawed from ego-forward and
    pitched down by the given angles (radians)."""
    c, s = np.cos(-pitch_down), np.sin(-pitch_down)
    pitch = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    return _rotation_z(yaw) @ _CAMERA_BASE @ pitch


def surround_rig(count=6, width=240, height=180, pitch_down=np.deg2rad(12.0),
                 mount_radius=0.4, mount_height=1.6):
    """Evenly yawed ring of identical cameras around the ego center."""
    fx = 0.5625 * width
    cameras = []
    for i in range(count):
        yaw = 2.0 * np.pi * i / count
        pose = RigidTransform(
            camera_rotation(yaw, pitch_down),
            np.array([mount_radius * np.cos(yaw), mount_radius * np.sin(yaw), mount_height]),
        )
        intr = Intrinsics(fx, fx, width / 2.0, height / 2.0, width, height)
        cameras.append(SceneCamera(f"cam_{i:02d}", intr, pose))
    return cameras


def _straight_trajectory(timesteps, step=2.0):
    """Ego poses driving along +x, ending at the origin."""
    return [
        RigidTransform(np.eye(3), np.array([-step * (timesteps - 1 - t), 0.0, 0.0]))
        for t in range(timesteps)
    ]


def default_scene(timesteps=14, include_dynamic=True, camera_count=6,
                  width=240, height=180):
    """The frozen benchmark scene: a road plane, assorted static obstacles,
    and one car driving against the ego direction.

    Box faces are placed in the interior half of their boundary voxels
    relative to the final ego pose, so surface points lifted from renderings
    fall into voxels whose centers the box contains: rendering, lifting,
    and the analytic grid then agree exactly on surface voxels.
    """
    boxes = [
        # thin pole
        Box((5.0, 6.2, 0.8), (0.3, 0.3, 1.9), 15),
        # low wall segment
        Box((3.8, -7.6, 0.4), (1.1, 0.7, 1.1), 15),
        # long roadside barrier
        Box((-5.8, -4.6, 0.2), (4.3, 0.3, 0.7), 1),
        # vegetation block
        Box((-6.6, -5.8, 0.6), (1.1, 1.1, 1.5), 16),
        # far wall, outside the scored neighborhood
        Box((13.2, 0.0, 0.8), (0.7, 12.7, 1.9), 15),
    ]
    if include_dynamic:
        motion = np.array([[0.8 * (timesteps - 1 - t), 0.0, 0.0] for t in range(timesteps)])
        # car body box at ride height: clear of the road's voxel layer so
        # its boundary voxels never mix car and road surface points
        boxes.append(Box((-1.2, -2.0, 0.6), (1.5, 0.7, 0.7), 4, dynamic=True, motion=motion))
    return SceneSpec(
        ground_z=0.0,
        ground_class=11,
        boxes=boxes,
        cameras=surround_rig(camera_count, width, height),
        ego_to_global=_straight_trajectory(timesteps),
        extent=((-48.0, -48.0, -2.0), (48.0, 48.0, 6.0)),
    )
