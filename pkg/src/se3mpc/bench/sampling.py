"""Seeded Monte-Carlo initial conditions."""

import numpy as np

from ..lie import Pose, exp_so3


def sample_initial_poses(n, seed, theta_max=2.8, p_max=0.5):
    """Deterministic random poses around the identity.

    Orientations: uniformly random axis, angle uniform on [0, theta_max].
    Positions: uniform in the cube of half-width p_max.  theta_max = 2.8
    rad lets the near-180-degree regime occur.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.default_rng(seed)
    poses = []
    for _ in range(n):
        axis = rng.normal(size=3)
        norm = np.linalg.norm(axis)
        axis = axis / norm if norm > 0 else np.array([1.0, 0.0, 0.0])
        angle = rng.uniform(0.0, theta_max) if theta_max > 0 else 0.0
        p = rng.uniform(-p_max, p_max, size=3) if p_max > 0 else np.zeros(3)
        poses.append(Pose(exp_so3(angle * axis), p))
    return poses
