"""Reference trajectory generators.

A reference is a callable ``t -> (Pose X_d, twist xi_d)``.  Step profiles
are realized as instantaneous jumps with xi_d = 0 (the controller sees a
fixed new target); at a discontinuity the knot active at time t is the last
one with knot time <= t.
"""

import math

import numpy as np

from ..lie import Pose, exp_se3, exp_so3


class UnknownSpec(ValueError):
    """Unrecognized reference specification."""


def rpy_matrix(roll, pitch, yaw):
    """Rotation from roll-pitch-yaw (radians): R = Rz(yaw) Ry(pitch) Rx(roll)."""
    return (
        exp_so3(np.array([0.0, 0.0, yaw]))
        @ exp_so3(np.array([0.0, pitch, 0.0]))
        @ exp_so3(np.array([roll, 0.0, 0.0]))
    )


class ConstantTwistReference:
    """X_d(t) = exp(xi_d t) from the identity."""

    def __init__(self, xi_d):
        self.xi_d = np.asarray(xi_d, dtype=float)

    def __call__(self, t):
        return exp_se3(self.xi_d * t), self.xi_d


class StepPoseReference:
    """Piecewise-constant pose targets with zero reference twist.

    ``knots`` is a sequence of (time, roll, pitch, yaw, position) with
    angles in radians and strictly increasing times starting at 0.
    """

    def __init__(self, knots):
        self.times = np.array([k[0] for k in knots], dtype=float)
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0.0):
            raise UnknownSpec("knot times must start at 0 and increase")
        self.poses = [
            Pose(rpy_matrix(k[1], k[2], k[3]), np.asarray(k[4], dtype=float))
            for k in knots
        ]
        self._zero = np.zeros(6)

    def __call__(self, t):
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        idx = max(idx, 0)
        return self.poses[idx], self._zero


class TabulatedReference:
    """Time-tabulated poses and twists, held piecewise-constant."""

    def __init__(self, times, poses, twists):
        self.times = np.asarray(times, dtype=float)
        if np.any(np.diff(self.times) <= 0.0):
            raise UnknownSpec("tabulated times must increase")
        self.poses = list(poses)
        self.twists = [np.asarray(x, dtype=float) for x in twists]

    def __call__(self, t):
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        idx = min(max(idx, 0), len(self.poses) - 1)
        return self.poses[idx], self.twists[idx]


def generate_reference(spec):
    """Build a reference from a scenario [reference] table."""
    kind = spec.get("type")
    if kind == "constant_twist":
        return ConstantTwistReference(spec["twist"])
    if kind == "euler_steps":
        knots = []
        for row in spec["steps"]:
            rpy = [math.radians(a) for a in row["rpy_deg"]]
            knots.append((row["t"], rpy[0], rpy[1], rpy[2], row.get("position", [0, 0, 0])))
        return StepPoseReference(knots)
    if kind == "tabulated":
        times, poses, twists = [], [], []
        for row in spec["rows"]:
            rpy = [math.radians(a) for a in row["rpy_deg"]]
            times.append(row["t"])
            poses.append(Pose(rpy_matrix(*rpy), np.asarray(row.get("position", [0, 0, 0]), dtype=float)))
            twists.append(row.get("twist", [0.0] * 6))
        return TabulatedReference(times, poses, twists)
    raise UnknownSpec(f"unknown reference type {kind!r}")
