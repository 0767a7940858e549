"""Evaluation metrics: scene constraints, goal reaching, motion quality.

All values are deterministic functions of their inputs. Penetration and
contact distance use joint points against the heightfield (feet inflated
by the foot radius for penetration); goal error reports full 3D distance
in centimeters plus absolute facing error in radians; foot skate is the
mean horizontal slide of foot joints across consecutive in-contact
frames; diversity is the mean pairwise L2 distance between flattened
joint-position tracks.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .canonical import GoalFrame
from .errors import TooFewSamples
from .heightfield import HeightField, height_at
from .kinematics import forward_kinematics
from .motion import MotionSegment
from .rotations import sixd_to_matrix, yaw_of_matrix
from .skeleton import Skeleton

M_TO_CM = 100.0


def penetration_metric(segment: MotionSegment, skeleton: Skeleton,
                       field: HeightField) -> float:
    """Mean penetration depth (cm) of all 22 joints below the terrain.

    Foot joints are inflated by the foot radius (their effective bottom);
    points above the terrain contribute zero.
    """
    pos = forward_kinematics(skeleton, segment)
    bottom = pos[..., 1].copy()
    bottom[:, skeleton.foot_joints] -= skeleton.foot_radius
    ground = height_at(field, pos[..., 0], pos[..., 2])
    depth = np.maximum(ground - bottom, 0.0)
    return float(depth.mean() * M_TO_CM)


def contact_distance_metric(segment: MotionSegment, skeleton: Skeleton,
                            field: HeightField) -> tuple[float, bool]:
    """Mean |foot height - terrain| (cm) over labeled contacts.

    Returns (value, has_contacts); no contacts yields (0.0, False).
    """
    pos = forward_kinematics(skeleton, segment)
    feet = pos[:, skeleton.foot_joints]
    ground = height_at(field, feet[..., 0], feet[..., 2])
    mask = segment.contacts.astype(bool)
    if not mask.any():
        return 0.0, False
    gap = np.abs(feet[..., 1] - ground)[mask]
    return float(gap.mean() * M_TO_CM), True


def goal_error(segment: MotionSegment, goal: GoalFrame) -> tuple[float, float]:
    """(position error cm, |facing error| rad in [0, pi]) at the final frame."""
    pos_err = float(np.linalg.norm(segment.root[-1] - goal.position) * M_TO_CM)
    final_yaw = float(yaw_of_matrix(sixd_to_matrix(segment.rotations[-1, 0])))
    diff = final_yaw - goal.yaw
    rot_err = abs(float(np.arctan2(np.sin(diff), np.cos(diff))))
    return pos_err, rot_err


def foot_skate(segment: MotionSegment, skeleton: Skeleton) -> float:
    """Mean horizontal foot displacement (cm/frame) during double-frame
    contacts; airborne sliding contributes nothing."""
    pos = forward_kinematics(skeleton, segment)
    feet_xz = pos[:, skeleton.foot_joints][:, :, [0, 2]]
    step = np.linalg.norm(np.diff(feet_xz, axis=0), axis=-1)  # (N-1, 4)
    mask = segment.contacts[1:].astype(bool) & segment.contacts[:-1].astype(bool)
    if not mask.any():
        return 0.0
    return float(step[mask].mean() * M_TO_CM)


def diversity(samples: list[MotionSegment], skeleton: Skeleton) -> float:
    """Mean pairwise L2 distance between flattened joint-position tracks."""
    if len(samples) < 2:
        raise TooFewSamples("diversity needs at least two samples")
    flats = [forward_kinematics(skeleton, s).reshape(-1) for s in samples]
    lengths = {len(f) for f in flats}
    if len(lengths) != 1:
        raise ValueError("diversity requires equal-length samples")
    total, count = 0.0, 0
    for i in range(len(flats)):
        for j in range(i + 1, len(flats)):
            total += float(np.linalg.norm(flats[i] - flats[j]))
            count += 1
    return total / count


@dataclass
class EvalReport:
    penetration_cm: float = 0.0
    contact_dist_cm: float = 0.0
    goal_pos_cm: float = 0.0
    goal_rot_rad: float = 0.0
    foot_skate_cm: float = 0.0
    diversity: float = 0.0
    sequences: list[dict] = dc_field(default_factory=list)

    def row(self) -> dict:
        return {
            "penetration_cm": self.penetration_cm,
            "contact_dist_cm": self.contact_dist_cm,
            "goal_pos_cm": self.goal_pos_cm,
            "goal_rot_rad": self.goal_rot_rad,
            "foot_skate_cm": self.foot_skate_cm,
            "diversity": self.diversity,
        }


def evaluate_sequences(
    runs: list[tuple[MotionSegment, GoalFrame]],
    skeleton: Skeleton,
    field: HeightField,
    diversity_samples: list[MotionSegment] | None = None,
) -> EvalReport:
    """Aggregate report over (motion, final goal) pairs on one terrain."""
    report = EvalReport()
    rows = []
    for idx, (segment, goal) in enumerate(runs):
        pen = penetration_metric(segment, skeleton, field)
        cdist, has_c = contact_distance_metric(segment, skeleton, field)
        gpos, grot = goal_error(segment, goal)
        skate = foot_skate(segment, skeleton)
        rows.append(
            {
                "sequence": idx,
                "penetration_cm": pen,
                "contact_dist_cm": cdist,
                "has_contacts": has_c,
                "goal_pos_cm": gpos,
                "goal_rot_rad": grot,
                "foot_skate_cm": skate,
            }
        )
    report.sequences = rows
    if rows:
        for key in ("penetration_cm", "contact_dist_cm", "goal_pos_cm",
                    "goal_rot_rad", "foot_skate_cm"):
            setattr(report, key, float(np.mean([r[key] for r in rows])))
    if diversity_samples and len(diversity_samples) >= 2:
        report.diversity = diversity(diversity_samples, skeleton)
    return report
