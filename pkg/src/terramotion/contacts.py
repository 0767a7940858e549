"""Foot-contact labeling against a heightfield.

Procedural data carries phase-derived labels; this detector exists for
imported or synthesized motion without labels.
"""

import numpy as np

from .heightfield import HeightField, height_at
from .skeleton import Skeleton

CONTACT_HEIGHT_EPS = 0.05  # meters above local terrain
CONTACT_SPEED_EPS = 0.05   # meters per frame, horizontal


def detect_foot_contacts(
    skeleton: Skeleton,
    positions: np.ndarray,
    terrain: HeightField,
    height_eps: float = CONTACT_HEIGHT_EPS,
    speed_eps: float = CONTACT_SPEED_EPS,
) -> np.ndarray:
    """(N, 4) binary labels for the four foot joints.

    A foot is in contact when its clearance above the terrain is below
    `height_eps` AND its horizontal displacement to the next frame is
    below `speed_eps` (the last frame reuses the previous displacement).
    Raises OutOfBounds if a foot projects outside the field.
    """
    feet = positions[:, skeleton.foot_joints]          # (N, 4, 3)
    ground = height_at(terrain, feet[..., 0], feet[..., 2])
    clearance = feet[..., 1] - ground

    xz = feet[:, :, [0, 2]]
    step = np.linalg.norm(np.diff(xz, axis=0), axis=-1)  # (N-1, 4)
    if len(step) == 0:
        speed = np.zeros_like(clearance)
    else:
        speed = np.concatenate([step, step[-1:]], axis=0)

    return ((clearance < height_eps) & (speed < speed_eps)).astype(np.int64)
