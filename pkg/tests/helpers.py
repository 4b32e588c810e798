from __future__ import annotations

import numpy as np

from posefuse.geometry import Pose, UnitQuaternion, Vec3


def random_quaternion(rng: np.random.Generator) -> UnitQuaternion:
    w, x, y, z = rng.normal(size=4)
    return UnitQuaternion(w, x, y, z)


def random_vec3(rng: np.random.Generator, scale: float = 10.0) -> Vec3:
    x, y, z = rng.uniform(-scale, scale, size=3)
    return Vec3(x, y, z)


def random_pose(rng: np.random.Generator, scale: float = 10.0) -> Pose:
    return Pose(random_vec3(rng, scale), random_quaternion(rng))
