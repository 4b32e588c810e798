"""Synthetic trajectory and sensor stream generation.

Ground truth is a smooth planar walk: heading evolves as a random walk
with configurable turn rate, speed fluctuates around its mean, and the
orientation follows the heading.  The two sensor models layer on top:

* vio: starts exactly at ground truth, then integrates the true
  per-step motion corrupted by white noise plus a constant per-sequence
  bias.  Errors therefore accumulate and never reset, which is the
  defining failure mode of odometry.
* apr: each frame is an independent draw, ground truth plus either
  small Gaussian noise (inlier) or a large uniform perturbation
  (outlier).  No temporal correlation, which is the defining failure
  mode of per-image absolute regression.

All randomness comes from numpy's PCG64 generator seeded explicitly, so
any seed reproduces the same streams on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import (
    Pose,
    UnitQuaternion,
    Vec3,
    axis_angle_quaternion,
    compose,
    inverse,
)
from .io import PoseSample


@dataclass(frozen=True)
class TrajectoryConfig:
    n_frames: int = 200
    frame_rate_hz: float = 1.0
    speed_mean: float = 1.2  # m/s, walking pace
    speed_std: float = 0.3  # m/s
    turn_rate_std: float = 60.0  # deg/s of heading change; capture walks meander
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_frames < 2:
            raise ValueError("n_frames must be >= 2")
        if not self.frame_rate_hz > 0.0:
            raise ValueError("frame_rate_hz must be positive")
        if not self.speed_mean > 0.0:
            raise ValueError("speed_mean must be positive")
        if self.speed_std < 0.0 or self.turn_rate_std < 0.0:
            raise ValueError("speed_std and turn_rate_std must be >= 0")


@dataclass(frozen=True)
class VioNoiseModel:
    """Per-step odometry corruption.  Sigmas are per step; the drift
    biases are constant over a sequence with a random direction drawn
    once per sequence."""

    step_pos_sigma: float = 0.02  # m, per axis
    step_rot_sigma: float = 0.2  # deg, about a random axis
    drift_bias_pos: float = 0.01  # m per step, fixed random direction
    drift_bias_rot: float = 0.05  # deg per step, fixed random axis

    def __post_init__(self) -> None:
        for name in ("step_pos_sigma", "step_rot_sigma", "drift_bias_pos", "drift_bias_rot"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class AprNoiseModel:
    """Per-frame absolute-pose corruption, independent across frames."""

    inlier_pos_sigma: float = 0.5  # m, per axis
    inlier_rot_sigma: float = 2.5  # deg, about a random axis
    outlier_prob: float = 0.15
    outlier_pos_range: float = 5.0  # m, uniform in a ball of this radius
    outlier_rot_range: float = 20.0  # deg, uniform magnitude, random axis

    def __post_init__(self) -> None:
        if not 0.0 <= self.outlier_prob <= 1.0:
            raise ValueError("outlier_prob must be in [0, 1]")
        for name in ("inlier_pos_sigma", "inlier_rot_sigma", "outlier_pos_range", "outlier_rot_range"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")


def _rng(seed: int) -> np.random.Generator:
    # PCG64 is pinned on purpose: seeded streams must reproduce across
    # platforms and sessions.
    return np.random.Generator(np.random.PCG64(seed))


def _random_unit(rng: np.random.Generator) -> Vec3:
    while True:
        v = rng.normal(0.0, 1.0, 3)
        n = float(np.linalg.norm(v))
        if n > 1e-6:
            return Vec3(v[0] / n, v[1] / n, v[2] / n)


def generate_gt(cfg: TrajectoryConfig) -> list[PoseSample]:
    """Ground-truth walk.  Returns PoseSamples carrying only the gt
    stream, timestamped at the frame rate starting from zero."""
    rng = _rng(cfg.seed)
    dt = 1.0 / cfg.frame_rate_hz
    yaw_deg = 0.0
    pos = Vec3.zero()
    z_axis = Vec3(0.0, 0.0, 1.0)
    samples = [
        PoseSample(0, 0.0, gt=Pose(pos, UnitQuaternion.identity()))
    ]
    for i in range(1, cfg.n_frames):
        yaw_deg += float(rng.normal(0.0, cfg.turn_rate_std)) * dt
        speed = max(float(rng.normal(cfg.speed_mean, cfg.speed_std)), 0.0)
        heading = math.radians(yaw_deg)
        step = Vec3(math.cos(heading), math.sin(heading), 0.0) * (speed * dt)
        pos = pos + step
        ori = axis_angle_quaternion(z_axis, yaw_deg)
        samples.append(PoseSample(i, i * dt, gt=Pose(pos, ori)))
    return samples


def simulate_vio(gt: Sequence[Pose], model: VioNoiseModel, seed: int) -> list[Pose]:
    """Odometry track over a ground-truth track.

    The first pose equals gt exactly.  Every step then applies the true
    relative motion perturbed by white noise and the sequence-constant
    bias, so the error is a random walk plus a linear-in-time term.
    Translation noise is applied in the world frame; rotation noise
    composes on the body side.
    """
    if len(gt) == 0:
        raise ValueError("simulate_vio needs a non-empty ground-truth track")
    rng = _rng(seed)
    bias_dir = _random_unit(rng)
    bias_axis = _random_unit(rng)
    out = [gt[0]]
    for i in range(1, len(gt)):
        d_pos = gt[i].position - gt[i - 1].position
        d_rot = compose(inverse(gt[i - 1].orientation), gt[i].orientation)
        noise = rng.normal(0.0, model.step_pos_sigma, 3)
        pos = (
            out[-1].position
            + d_pos
            + Vec3(noise[0], noise[1], noise[2])
            + bias_dir * model.drift_bias_pos
        )
        ori = compose(out[-1].orientation, d_rot)
        if model.step_rot_sigma > 0.0:
            ori = compose(
                ori,
                axis_angle_quaternion(
                    _random_unit(rng), float(rng.normal(0.0, model.step_rot_sigma))
                ),
            )
        if model.drift_bias_rot > 0.0:
            ori = compose(ori, axis_angle_quaternion(bias_axis, model.drift_bias_rot))
        out.append(Pose(pos, ori))
    return out


def simulate_apr(gt: Sequence[Pose], model: AprNoiseModel, seed: int) -> list[Pose]:
    """Absolute-pose track over a ground-truth track, one independent
    draw per frame."""
    rng = _rng(seed)
    out: list[Pose] = []
    for pose in gt:
        if float(rng.random()) < model.outlier_prob:
            # Offset uniform in a ball, rotation of uniform magnitude.
            radius = model.outlier_pos_range * float(rng.random()) ** (1.0 / 3.0)
            offset = _random_unit(rng) * radius
            angle = float(rng.uniform(0.0, model.outlier_rot_range))
        else:
            noise = rng.normal(0.0, model.inlier_pos_sigma, 3)
            offset = Vec3(noise[0], noise[1], noise[2])
            angle = float(rng.normal(0.0, model.inlier_rot_sigma))
        ori = pose.orientation
        if angle != 0.0:
            ori = compose(ori, axis_angle_quaternion(_random_unit(rng), angle))
        out.append(Pose(pose.position + offset, ori))
    return out
