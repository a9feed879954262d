import numpy as np

from voxlab.geometry import RigidTransform


def random_rotation(rng):
    """Uniform-ish random rotation via QR with the determinant fixed up."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_transform(rng, translation_scale=10.0):
    return RigidTransform(random_rotation(rng),
                          rng.uniform(-translation_scale, translation_scale, size=3))
