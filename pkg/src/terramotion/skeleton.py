"""Fixed 22-joint stick skeleton (SMPL-style hierarchy, hand-authored offsets).

Joint order:
  0 pelvis      1 l_hip       2 r_hip       3 spine1
  4 l_knee      5 r_knee      6 spine2      7 l_ankle
  8 r_ankle     9 spine3     10 l_toe      11 r_toe
 12 neck       13 l_collar   14 r_collar   15 head
 16 l_shoulder 17 r_shoulder 18 l_elbow    19 r_elbow
 20 l_wrist    21 r_wrist

The character faces +Z in the rest pose; +X is its left side. The two
ankles double as heel contact points and sit near the ground (rest
clearance ~0.04 m), so the four contact channels are
[l_ankle, r_ankle, l_toe, r_toe]. Total rest height ~1.7 m.
"""

from dataclasses import dataclass, field

import numpy as np

JOINT_COUNT = 22

JOINT_NAMES = [
    "pelvis", "l_hip", "r_hip", "spine1", "l_knee", "r_knee", "spine2",
    "l_ankle", "r_ankle", "spine3", "l_toe", "r_toe", "neck", "l_collar",
    "r_collar", "head", "l_shoulder", "r_shoulder", "l_elbow", "r_elbow",
    "l_wrist", "r_wrist",
]

PARENTS = np.array(
    [-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19],
    dtype=np.int64,
)

# Rest-pose bone offsets in meters (child position relative to parent).
OFFSETS = np.array([
    [0.00, 0.00, 0.00],    # pelvis (unused; root position comes from channels)
    [0.09, -0.05, 0.00],   # l_hip
    [-0.09, -0.05, 0.00],  # r_hip
    [0.00, 0.11, 0.00],    # spine1
    [0.00, -0.40, 0.00],   # l_knee
    [0.00, -0.40, 0.00],   # r_knee
    [0.00, 0.14, 0.00],    # spine2
    [0.00, -0.46, -0.02],  # l_ankle (heel point, near ground)
    [0.00, -0.46, -0.02],  # r_ankle
    [0.00, 0.15, 0.00],    # spine3
    [0.00, -0.02, 0.15],   # l_toe
    [0.00, -0.02, 0.15],   # r_toe
    [0.00, 0.22, 0.00],    # neck
    [0.07, 0.15, 0.00],    # l_collar
    [-0.07, 0.15, 0.00],   # r_collar
    [0.00, 0.14, 0.00],    # head
    [0.11, 0.00, 0.00],    # l_shoulder
    [-0.11, 0.00, 0.00],   # r_shoulder
    [0.27, 0.00, 0.00],    # l_elbow
    [-0.27, 0.00, 0.00],   # r_elbow
    [0.25, 0.00, 0.00],    # l_wrist
    [-0.25, 0.00, 0.00],   # r_wrist
], dtype=np.float64)

FOOT_JOINTS = np.array([7, 8, 10, 11], dtype=np.int64)  # l_heel, r_heel, l_toe, r_toe

# Left/right correspondence used by pose mirroring. The paper-side convention
# is unstated, so this table is the documented choice for this skeleton.
MIRROR_PAIRS = [(1, 2), (4, 5), (7, 8), (10, 11), (13, 14), (16, 17), (18, 19), (20, 21)]

MIRROR_PERM = np.arange(JOINT_COUNT)
for _l, _r in MIRROR_PAIRS:
    MIRROR_PERM[_l], MIRROR_PERM[_r] = _r, _l

# Contact channels swap left<->right: [l_heel, r_heel, l_toe, r_toe]
CONTACT_MIRROR_PERM = np.array([1, 0, 3, 2], dtype=np.int64)


@dataclass(frozen=True)
class Skeleton:
    """Joint hierarchy with rest offsets and foot metadata.

    parent[0] is -1 (root sentinel) and parent[i] < i, so a single
    forward pass visits parents before children.
    """

    parents: np.ndarray = field(default_factory=lambda: PARENTS.copy())
    offsets: np.ndarray = field(default_factory=lambda: OFFSETS.copy())
    foot_joints: np.ndarray = field(default_factory=lambda: FOOT_JOINTS.copy())
    foot_radius: float = 0.02

    @property
    def joint_count(self) -> int:
        return len(self.parents)

    def validate(self) -> None:
        if self.parents[0] != -1:
            raise ValueError("parent[0] must be the root sentinel -1")
        for i in range(1, self.joint_count):
            if not 0 <= self.parents[i] < i:
                raise ValueError(f"parents must be topologically ordered (joint {i})")
        if not np.all(np.isfinite(self.offsets)):
            raise ValueError("offsets must be finite")
        fj = self.foot_joints
        if len(set(int(j) for j in fj)) != 4 or fj.min() < 0 or fj.max() >= self.joint_count:
            raise ValueError("foot_joints must be 4 distinct valid indices")

    def bone_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.offsets, axis=1)


def default_skeleton() -> Skeleton:
    sk = Skeleton()
    sk.validate()
    return sk


# Leg geometry shared by the procedural gait generator.
UPPER_LEG = float(np.linalg.norm(OFFSETS[4]))   # hip -> knee
LOWER_LEG = float(np.linalg.norm(OFFSETS[7]))   # knee -> ankle
FOOT_LENGTH = float(np.linalg.norm(OFFSETS[10]))  # ankle -> toe
