"""Pose and rotation primitives shared by the whole package.

Conventions, fixed once here so every module agrees:

* Quaternions are Hamilton, scalar-first (w, x, y, z), unit norm.
  Composition matches matrix composition: R(compose(a, b)) = R(a) @ R(b).
* The double cover is collapsed on construction: w >= 0, with ties on
  w == 0 broken so the first nonzero of (x, y, z) is >= 0.  Two
  quaternions describing the same rotation therefore compare equal
  componentwise up to float noise.
* Distances are meters, angles are degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

# Constructors must leave quaternions unit norm within this bound.
UNIT_NORM_TOL = 1e-9

# Orthonormality / determinant bound for rotation matrices.
ROTATION_TOL = 1e-9


@dataclass(frozen=True)
class Vec3:
    """Point or translation in 3-space, meters."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "z"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"Vec3.{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s)

    __rmul__ = __mul__

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, a: Iterable[float]) -> "Vec3":
        ax, ay, az = a
        return cls(float(ax), float(ay), float(az))

    @classmethod
    def zero(cls) -> "Vec3":
        return cls(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class UnitQuaternion:
    """Unit quaternion, scalar first.  Normalized and sign-canonicalized
    by the constructor, so any four finite non-degenerate components are
    accepted."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        vals = [float(self.w), float(self.x), float(self.y), float(self.z)]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"quaternion components must be finite, got {vals}")
        n = math.sqrt(sum(v * v for v in vals))
        if n < 1e-12:
            raise ValueError("quaternion norm too close to zero to normalize")
        vals = [v / n for v in vals]
        if _canonical_flip(vals):
            vals = [-v for v in vals]
        for name, v in zip(("w", "x", "y", "z"), vals):
            object.__setattr__(self, name, v)

    @classmethod
    def identity(cls) -> "UnitQuaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z], dtype=float)


def _canonical_flip(vals: list[float]) -> bool:
    # Sign rule collapsing the double cover: w >= 0, tie broken by the
    # first nonzero vector component.
    w = vals[0]
    if w != 0.0:
        return w < 0.0
    for v in vals[1:]:
        if v != 0.0:
            return v < 0.0
    return False


@dataclass(frozen=True)
class Pose:
    """Position plus orientation of one frame."""

    position: Vec3
    orientation: UnitQuaternion


@dataclass(frozen=True)
class Odometry:
    """Scalar motion between two poses: distance traveled (m) and
    rotation magnitude (deg).  Directions are deliberately dropped, the
    reliability checks compare magnitudes only."""

    dist: float
    angle: float

    def __post_init__(self) -> None:
        dist = float(self.dist)
        angle = float(self.angle)
        if not (math.isfinite(dist) and dist >= 0.0):
            raise ValueError(f"odometry distance must be finite and >= 0, got {dist!r}")
        if not (math.isfinite(angle) and 0.0 <= angle <= 180.0):
            raise ValueError(f"odometry angle must be in [0, 180] degrees, got {angle!r}")
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "angle", angle)


@dataclass(frozen=True, eq=False)
class RotationMatrix:
    """Proper rotation, 3x3.  Validated orthonormal with det +1."""

    m: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"rotation matrix must be 3x3, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("rotation matrix entries must be finite")
        if not np.allclose(m @ m.T, np.eye(3), atol=ROTATION_TOL, rtol=0.0):
            raise ValueError("matrix is not orthonormal within 1e-9")
        if abs(np.linalg.det(m) - 1.0) > 1e-8:
            raise ValueError("matrix determinant is not +1, improper rotation rejected")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "m", m)

    def apply(self, v: Vec3) -> Vec3:
        return Vec3.from_array(self.m @ v.as_array())

    def to_quaternion(self) -> UnitQuaternion:
        """Shepperd-style extraction, branch on the largest diagonal term."""
        m = self.m
        t = np.trace(m)
        if t > 0.0:
            s = math.sqrt(t + 1.0) * 2.0
            w = 0.25 * s
            x = (m[2, 1] - m[1, 2]) / s
            y = (m[0, 2] - m[2, 0]) / s
            z = (m[1, 0] - m[0, 1]) / s
        elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
            w = (m[2, 1] - m[1, 2]) / s
            x = 0.25 * s
            y = (m[0, 1] + m[1, 0]) / s
            z = (m[0, 2] + m[2, 0]) / s
        elif m[1, 1] > m[2, 2]:
            s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
            w = (m[0, 2] - m[2, 0]) / s
            x = (m[0, 1] + m[1, 0]) / s
            y = 0.25 * s
            z = (m[1, 2] + m[2, 1]) / s
        else:
            s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
            w = (m[1, 0] - m[0, 1]) / s
            x = (m[0, 2] + m[2, 0]) / s
            y = (m[1, 2] + m[2, 1]) / s
            z = 0.25 * s
        return UnitQuaternion(w, x, y, z)

    @classmethod
    def identity(cls) -> "RotationMatrix":
        return cls(np.eye(3))


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation followed by translation, x' = R x + t."""

    rotation: RotationMatrix
    translation: Vec3

    def apply_point(self, p: Vec3) -> Vec3:
        return self.rotation.apply(p) + self.translation

    def apply_pose(self, pose: Pose) -> Pose:
        # Orientations pick up the transform rotation on the left, the
        # world frame is what the transform re-expresses.
        q = compose(self.rotation.to_quaternion(), pose.orientation)
        return Pose(self.apply_point(pose.position), q)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(RotationMatrix.identity(), Vec3.zero())

    @classmethod
    def from_quaternion(cls, q: UnitQuaternion, t: Vec3) -> "RigidTransform":
        return cls(to_rotation_matrix(q), t)


def compose(a: UnitQuaternion, b: UnitQuaternion) -> UnitQuaternion:
    """Hamilton product a * b, renormalized and sign-canonicalized."""
    return UnitQuaternion(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )


def inverse(q: UnitQuaternion) -> UnitQuaternion:
    """Conjugate, which is the inverse for unit quaternions."""
    return UnitQuaternion(q.w, -q.x, -q.y, -q.z)


def rotation_angle_deg(a: UnitQuaternion, b: UnitQuaternion) -> float:
    """Magnitude of the relative rotation between two orientations, in
    [0, 180] degrees.  Symmetric in its arguments and blind to the
    quaternion double cover."""
    # The scalar part of inverse(a) * b is the 4-vector dot product.
    c = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z
    # |c| can exceed 1 by float noise, clamp before acos.
    c = min(1.0, abs(c))
    return math.degrees(2.0 * math.acos(c))


def translation_distance(a: Vec3, b: Vec3) -> float:
    """Euclidean distance in meters."""
    return (b - a).norm()


def odometry(a: Pose, b: Pose) -> Odometry:
    """Scalar motion magnitudes between two poses."""
    return Odometry(
        translation_distance(a.position, b.position),
        rotation_angle_deg(a.orientation, b.orientation),
    )


def to_rotation_matrix(q: UnitQuaternion) -> RotationMatrix:
    w, x, y, z = q.w, q.x, q.y, q.z
    m = np.array(
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    )
    return RotationMatrix(m)


def rotate(q: UnitQuaternion, v: Vec3) -> Vec3:
    """Rotate a vector by a quaternion without building the matrix."""
    # v' = v + 2 w (u x v) + 2 u x (u x v), u the vector part.
    ux, uy, uz = q.x, q.y, q.z
    cx = uy * v.z - uz * v.y
    cy = uz * v.x - ux * v.z
    cz = ux * v.y - uy * v.x
    dx = uy * cz - uz * cy
    dy = uz * cx - ux * cz
    dz = ux * cy - uy * cx
    return Vec3(
        v.x + 2.0 * (q.w * cx + dx),
        v.y + 2.0 * (q.w * cy + dy),
        v.z + 2.0 * (q.w * cz + dz),
    )


def axis_angle_quaternion(axis: Vec3, angle_deg: float) -> UnitQuaternion:
    """Quaternion for a rotation of angle_deg about axis."""
    n = axis.norm()
    if n < 1e-12:
        raise ValueError("rotation axis must be nonzero")
    half = math.radians(angle_deg) * 0.5
    s = math.sin(half) / n
    return UnitQuaternion(math.cos(half), axis.x * s, axis.y * s, axis.z * s)
