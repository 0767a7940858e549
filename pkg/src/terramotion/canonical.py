"""Goal-centric canonicalization.

A goal defines a coordinate frame: its position becomes the origin and
its facing direction becomes +Z. Motion expressed in that frame lets a
generative model learn goal reaching as "converge to the origin facing
+Z" regardless of where the goal sits in the world.

The transform is rigid (pure yaw + translation): translate by
-goal_position first, then rotate about +Y by -goal_yaw.
"""

from dataclasses import dataclass, replace

import numpy as np

from .motion import MotionSegment
from .rotations import (
    facing_to_yaw,
    matrix_to_sixd,
    sixd_to_matrix,
    yaw_matrix,
)


@dataclass(frozen=True)
class GoalFrame:
    """Target position (3D, meters) and desired facing (unit XZ vector)."""

    position: np.ndarray
    facing: np.ndarray

    def validate(self) -> None:
        if abs(np.linalg.norm(self.facing) - 1.0) > 1e-6:
            raise ValueError("goal facing must be a unit vector")

    @property
    def yaw(self) -> float:
        return float(facing_to_yaw(self.facing))


def goal_frame(x, y, z, fx, fz) -> GoalFrame:
    f = np.array([fx, fz], dtype=np.float64)
    f /= np.linalg.norm(f)
    return GoalFrame(position=np.array([x, y, z], dtype=np.float64), facing=f)


@dataclass(frozen=True)
class CanonicalTransform:
    """p_canonical = R_y(yaw) @ (p_world + translation)."""

    yaw: float
    translation: np.ndarray

    def apply_points(self, points: np.ndarray) -> np.ndarray:
        rot = yaw_matrix(self.yaw)
        return (points + self.translation) @ rot.T

    def invert_points(self, points: np.ndarray) -> np.ndarray:
        rot = yaw_matrix(-self.yaw)
        return points @ rot.T - self.translation

    @property
    def inverse(self) -> "CanonicalTransform":
        # apply(p) = R(yaw)(p + t)  =>  inverse is q -> R(-yaw) q - t
        rot = yaw_matrix(self.yaw)
        return CanonicalTransform(yaw=-self.yaw, translation=-(rot @ self.translation))


def identity_transform() -> CanonicalTransform:
    return CanonicalTransform(yaw=0.0, translation=np.zeros(3))


def canonicalize_motion(
    segment: MotionSegment, goal: GoalFrame
) -> tuple[MotionSegment, CanonicalTransform]:
    """Express a motion in the goal's coordinate frame.

    Root positions map through the rigid transform; the root joint's
    global rotation is pre-multiplied by the same yaw. Non-root rotations
    are parent-relative and therefore unchanged. Returns the transform so
    the motion can be mapped back.
    """
    transform = CanonicalTransform(yaw=-goal.yaw, translation=-goal.position.copy())
    return apply_transform(segment, transform), transform


def decanonicalize_motion(segment: MotionSegment, transform: CanonicalTransform) -> MotionSegment:
    """Exact inverse of canonicalize_motion for the same transform."""
    return apply_transform(segment, transform.inverse)


def apply_transform(segment: MotionSegment, transform: CanonicalTransform) -> MotionSegment:
    root = transform.apply_points(segment.root)
    rot = yaw_matrix(transform.yaw)
    root_mats = sixd_to_matrix(segment.rotations[:, 0])
    new_root_rot = matrix_to_sixd(rot @ root_mats, tol=np.inf)
    rotations = segment.rotations.copy()
    rotations[:, 0] = new_root_rot
    return replace(segment, rotations=rotations, root=root)
