"""Frame algebra and camera geometry.

Rigid transforms are stored as a 3x3 rotation matrix plus a translation
vector; quaternions appear only at the end-effector orientation boundary
(roll-only by construction). Depth back-projection follows the standard
pinhole model with depth supplied in millimeters.

All types are immutable values and all operations are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Rotations within this tolerance of orthonormal are accepted as-is.
STRICT_ORTHONORMAL_TOL = 1e-9
# Noisier rotations (e.g. from an upstream marker detector) are accepted up
# to this tolerance and re-projected onto the nearest rotation.
ACCEPT_ORTHONORMAL_TOL = 1e-6


class NonOrthonormalRotation(ValueError):
    """Rotation input deviates from orthonormal beyond the accept tolerance."""


class InvalidDepth(ValueError):
    """Depth value of zero encodes 'no measurement' and cannot be projected."""


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera parameters, all in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside image "
                f"{self.width}x{self.height}"
            )


@dataclass(frozen=True)
class Point3:
    """A 3D point in meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError(f"non-finite point ({self.x}, {self.y}, {self.z})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    @staticmethod
    def from_array(a) -> "Point3":
        return Point3(float(a[0]), float(a[1]), float(a[2]))

    def distance_to(self, other: "Point3") -> float:
        return math.sqrt(
            (self.x - other.x) ** 2 + (self.y - other.y) ** 2 + (self.z - other.z) ** 2
        )


@dataclass(frozen=True)
class PixelDepthPoint:
    """A pixel coordinate with its raw depth reading (millimeters, 0 = invalid)."""

    u: float
    v: float
    depth_mm: float

    def __post_init__(self):
        if self.depth_mm < 0:
            raise ValueError(f"depth_mm must be >= 0, got {self.depth_mm}")


@dataclass(frozen=True)
class RollQuaternion:
    """Unit quaternion restricted to rotation about the x-axis (qy = qz = 0)."""

    qx: float
    qy: float
    qz: float
    qw: float

    def __post_init__(self):
        if self.qy != 0.0 or self.qz != 0.0:
            raise ValueError(f"roll quaternion requires qy = qz = 0, got ({self.qy}, {self.qz})")
        norm = math.sqrt(self.qx**2 + self.qw**2)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"quaternion norm {norm} deviates from 1 beyond 1e-9")

    @staticmethod
    def identity() -> "RollQuaternion":
        return RollQuaternion(0.0, 0.0, 0.0, 1.0)

    @staticmethod
    def from_roll(phi: float) -> "RollQuaternion":
        return RollQuaternion(-math.sin(phi / 2.0), 0.0, 0.0, math.cos(phi / 2.0))

    @property
    def roll_angle(self) -> float:
        """Rotation angle about x, in (-pi, pi]."""
        phi = -2.0 * math.atan2(self.qx, self.qw)
        if phi <= -math.pi:
            phi += 2.0 * math.pi
        elif phi > math.pi:
            phi -= 2.0 * math.pi
        return phi


def _as_rotation(rotation) -> np.ndarray:
    """Validate a rotation matrix, re-orthonormalizing mild numeric drift."""
    r = np.asarray(rotation, dtype=np.float64)
    if r.shape != (3, 3):
        raise NonOrthonormalRotation(f"rotation must be 3x3, got shape {r.shape}")
    deviation = float(np.max(np.abs(r.T @ r - np.eye(3))))
    if deviation > ACCEPT_ORTHONORMAL_TOL:
        raise NonOrthonormalRotation(f"R^T R deviates from identity by {deviation:.3e}")
    if np.linalg.det(r) < 0:
        raise NonOrthonormalRotation(f"det(R) = {np.linalg.det(r):.6f}, expected +1")
    if deviation > STRICT_ORTHONORMAL_TOL:
        # Nearest rotation by polar decomposition.
        u, _, vt = np.linalg.svd(r)
        r = u @ vt
        if np.linalg.det(r) < 0:
            u[:, -1] *= -1.0
            r = u @ vt
    return r


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation mapping points between frames: p' = R p + t."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = _as_rotation(self.rotation)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3).copy()
        if not np.all(np.isfinite(t)):
            raise ValueError(f"non-finite translation {t}")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def is_close_to(self, other: "RigidTransform", tol: float = 1e-9) -> bool:
        return bool(
            np.max(np.abs(self.rotation - other.rotation)) <= tol
            and np.max(np.abs(self.translation - other.translation)) <= tol
        )


def invert_pose(rotation, translation) -> RigidTransform:
    """Invert the homogeneous transform [R t; 0 1].

    Returns the transform with rotation R^T and translation -R^T t, so that
    composing the result with the input yields the identity.
    """
    r = _as_rotation(rotation)
    t = np.asarray(translation, dtype=np.float64).reshape(3)
    return RigidTransform(r.T, -(r.T @ t))


def back_project(p: PixelDepthPoint, k: CameraIntrinsics) -> Point3:
    """Lift a pixel + depth sample to a 3D point in the camera frame (meters)."""
    if p.depth_mm == 0:
        raise InvalidDepth(f"cannot back-project pixel ({p.u}, {p.v}) with zero depth")
    z = p.depth_mm / 1000.0
    x = (p.u - k.cx) * z / k.fx
    y = (p.v - k.cy) * z / k.fy
    return Point3(x, y, z)


def apply_transform(t: RigidTransform, p: Point3) -> Point3:
    """Map a point through the transform: R p + t."""
    return Point3.from_array(t.rotation @ p.as_array() + t.translation)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Chain two transforms so that compose(a, b)(p) == a(b(p))."""
    return RigidTransform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)
