"""Gait style definitions and the fixed per-style token codebook.

Styles drive both the procedural data generator (speed, cadence, posture)
and conditioning: each style owns one row of a fixed orthonormal 64-d
codebook, standing in for a text encoder while keeping the per-frame
64-wide token interface. Codes are constant per frame but can switch
mid-sequence.
"""

from dataclasses import dataclass

import numpy as np

TEXT_DIM = 64
CODEBOOK_SEED = 90_341


@dataclass(frozen=True)
class StyleDef:
    style_id: int
    name: str
    speed: tuple[float, float]   # m/s sampling range
    cadence: float               # full gait cycles per second (per foot)
    duty: float                  # stance fraction of a cycle
    root_height: float           # meters above smoothed terrain
    bob: float                   # vertical oscillation amplitude
    lean: float                  # forward pitch of the root, radians
    arm_swing: float             # radians
    arms_forward: float          # constant forward raise (zombie-style)
    is_jump: bool = False
    jump_height: float = 0.0


# Root heights leave the 0.86 m leg enough reach for each style's stride
# (planted feet trail up to speed*duty/cadence/2 behind the hip).
STYLES: dict[str, StyleDef] = {
    "stand": StyleDef(0, "stand", (0.0, 0.0), 0.9, 1.0, 0.87, 0.004, 0.02, 0.0, 0.0),
    "walk": StyleDef(1, "walk", (0.8, 1.1), 1.0, 0.6, 0.83, 0.012, 0.05, 0.25, 0.0),
    "run": StyleDef(2, "run", (1.5, 1.9), 1.4, 0.38, 0.84, 0.025, 0.12, 0.45, 0.0),
    "crouch": StyleDef(3, "crouch", (0.45, 0.65), 0.8, 0.65, 0.72, 0.01, 0.30, 0.15, 0.0),
    "jump": StyleDef(4, "jump", (0.5, 0.7), 0.75, 0.5, 0.86, 0.015, 0.08, 0.2, 0.0,
                     is_jump=True, jump_height=0.14),
    "zombie": StyleDef(5, "zombie", (0.5, 0.7), 0.8, 0.7, 0.82, 0.01, 0.18, 0.0, 1.25),
}

STYLE_BY_ID = {s.style_id: s for s in STYLES.values()}
STYLE_COUNT = len(STYLES)


def style_codebook() -> np.ndarray:
    """(STYLE_COUNT, 64) orthonormal style codes, fixed by seed."""
    rng = np.random.default_rng(CODEBOOK_SEED)
    q, _ = np.linalg.qr(rng.normal(size=(TEXT_DIM, TEXT_DIM)))
    return q[:STYLE_COUNT].copy()


def codes_for_ids(style_ids: np.ndarray, codebook: np.ndarray | None = None) -> np.ndarray:
    """(N, 64) per-frame codes for integer style ids (N,)."""
    if codebook is None:
        codebook = style_codebook()
    ids = np.asarray(style_ids, dtype=np.int64)
    if np.any(ids < 0) or np.any(ids >= len(codebook)):
        raise ValueError("style id outside codebook")
    return codebook[ids]
