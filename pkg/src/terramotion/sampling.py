"""Reverse-diffusion sampling of motion segments.

The denoiser is any callable (noisy_future, step, condition) -> clean
future prediction over flat motion features. Sampling iterates the
posterior with the fixed variance schedule; guidance edits the clean
prediction before the posterior mean is formed. Segments are 40 frames:
a 10-frame clean seed that is never noised plus 30 predicted frames.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DenoiserShapeMismatch
from .guidance import GuidanceContext, GuidanceSpec, apply_guidance, no_guidance
from .motion import FEATURE_DIM, MotionSegment, segment_from_features
from .schedule import NoiseSchedule, posterior_mean
from .styles import TEXT_DIM

SEGMENT_FRAMES = 40
SEED_FRAMES = 10


@dataclass(frozen=True)
class DiffusionCondition:
    """Per-segment conditioning: scene grids, per-frame text codes, seed.

    scene: (N, 145) flattened 12x12 goal-relative height grids plus the
           root-height channel, one row per segment frame
    text:  (N, 64) per-frame style codes
    seed:  (k, 139) clean canonical features of the seed frames
    """

    scene: np.ndarray
    text: np.ndarray
    seed: np.ndarray

    @property
    def frames(self) -> int:
        return self.scene.shape[0]

    @property
    def seed_frames(self) -> int:
        return self.seed.shape[0]

    @property
    def future_frames(self) -> int:
        return self.frames - self.seed_frames

    def validate(self) -> None:
        if self.text.shape != (self.frames, TEXT_DIM):
            raise ValueError("text must be (N, 64)")
        if self.seed.shape[1] != FEATURE_DIM:
            raise ValueError("seed must be (k, FEATURE_DIM)")
        if not (np.all(np.isfinite(self.scene)) and np.all(np.isfinite(self.text))
                and np.all(np.isfinite(self.seed))):
            raise ValueError("condition must be finite")


def sample_future_features(
    denoiser,
    condition: DiffusionCondition,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
    guidance: GuidanceSpec | None = None,
    guidance_ctx: GuidanceContext | None = None,
) -> np.ndarray:
    """Raw denoised future features (N - k, FEATURE_DIM)."""
    condition.validate()
    if guidance is None:
        guidance = no_guidance()
    guidance.validate()

    f = condition.future_frames
    shape = (f, FEATURE_DIM)
    x = rng.standard_normal(size=shape)
    for n in range(schedule.steps - 1, -1, -1):
        x0 = np.asarray(denoiser(x, n, condition), dtype=np.float64)
        if x0.shape != shape:
            raise DenoiserShapeMismatch(
                f"denoiser returned {x0.shape}, expected {shape}"
            )
        if guidance.active and guidance_ctx is not None and (
            guidance.mode == "every_step" or n == 0
        ):
            x0 = apply_guidance(x0, guidance, guidance_ctx)
        if n == 0:
            x = x0
        else:
            noise = rng.standard_normal(size=shape)
            sigma = np.sqrt(schedule.posterior_variance[n])
            x = posterior_mean(schedule, x0, x, n) + sigma * noise
    return x


def sample_segment(
    denoiser,
    condition: DiffusionCondition,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
    guidance: GuidanceSpec | None = None,
    guidance_ctx: GuidanceContext | None = None,
    fps: float = 30.0,
) -> MotionSegment:
    """Full canonical segment: clean seed frames (bit-equal to the
    condition's seed) followed by the denoised future frames, with 6D
    blocks re-orthonormalized and contacts thresholded."""
    future = sample_future_features(
        denoiser, condition, schedule, rng, guidance, guidance_ctx
    )
    seed_seg = segment_from_features(condition.seed, fps=fps, reorthonormalize=False)
    fut_seg = segment_from_features(future, fps=fps, reorthonormalize=True)
    return MotionSegment(
        rotations=np.concatenate([seed_seg.rotations, fut_seg.rotations]),
        root=np.concatenate([seed_seg.root, fut_seg.root]),
        contacts=np.concatenate([seed_seg.contacts, fut_seg.contacts]),
        fps=fps,
    )
