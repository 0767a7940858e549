"""Scene-aware inference guidance on clean motion predictions.

Each objective maps a flat future-motion block (F, 139) to a scalar and
its analytic gradient with respect to every feature, routed through the
6D decode, forward kinematics, the canonical-to-world transform and
bilinear terrain sampling. Guidance subtracts the weighted gradients
from the prediction:

    H~0 = H0 - sum_i alpha_i * grad J_i(H0)

Objectives (documented normalizations; these keep the default weights at
sane physical step sizes for a single gradient step):

* phys: mean over (frame, foot) pairs of the contact/penetration residual
  c|f - h| + (1-c) 1(h > f)|f - h|, with f the foot height, h the terrain
  height under it, and c the predicted contact label (a mask, not
  differentiated). The residual magnitude is huberized (quadratic within
  HUBER_DELTA, linear beyond) so the correction a weight produces is
  proportional to the defect instead of a fixed-size jump.
* smooth: mean squared consecutive joint displacement per coordinate
  (m^2), a velocity damper whose gradient scales with the jitter it
  removes. When the context carries the clean seed frames, differences
  span the seed/future seam so the edit cannot detach the segment from
  its history.
* collision: mean over body points of the huberized penetration depth
  max(-SDF, 0) into an object.

The default policy applies guidance only at the final denoising step;
an every-step mode exists for ablations.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .canonical import CanonicalTransform, identity_transform
from .heightfield import HeightField, height_at, height_gradient
from .kinematics import fk_forward, positions_gradient_to_features
from .motion import FEATURE_DIM
from .objects import SdfGrid
from .rotations import sixd_to_matrix, yaw_matrix
from .skeleton import Skeleton

DEFAULT_PHYS_WEIGHT = 3.0
DEFAULT_SMOOTH_WEIGHT = 50.0
DEFAULT_COLLISION_WEIGHT = 50.0

HUBER_DELTA = 0.05  # meters; residuals below this get proportional gradients

GUIDANCE_FINAL_STEP = "final_step"
GUIDANCE_EVERY_STEP = "every_step"


def _huber(x: np.ndarray, delta: float = HUBER_DELTA) -> tuple[np.ndarray, np.ndarray]:
    """(value, derivative) of the huber penalty of x."""
    ax = np.abs(x)
    small = ax < delta
    value = np.where(small, x * x / (2 * delta), ax - delta / 2)
    deriv = np.where(small, x / delta, np.sign(x))
    return value, deriv


@dataclass(frozen=True)
class GuidanceSpec:
    phys: float = DEFAULT_PHYS_WEIGHT
    smooth: float = DEFAULT_SMOOTH_WEIGHT
    collision: float = DEFAULT_COLLISION_WEIGHT
    mode: str = GUIDANCE_FINAL_STEP

    def validate(self) -> None:
        if min(self.phys, self.smooth, self.collision) < 0:
            raise ValueError("guidance weights must be non-negative")
        if self.mode not in (GUIDANCE_FINAL_STEP, GUIDANCE_EVERY_STEP):
            raise ValueError(f"unknown guidance mode: {self.mode}")

    @property
    def active(self) -> bool:
        return max(self.phys, self.smooth, self.collision) > 0


def no_guidance() -> GuidanceSpec:
    return GuidanceSpec(phys=0.0, smooth=0.0, collision=0.0)


@dataclass(frozen=True)
class GuidanceContext:
    """Everything the objectives need besides the motion itself.

    `transform` maps world points into the frame the features live in
    (identity when guiding world-frame motion directly). The terrain and
    SDF stay in world coordinates. `seed_features` are the clean frames
    preceding the guided block (same frame as the features); smoothing
    anchors on them when present.
    """

    skeleton: Skeleton
    terrain: HeightField | None = None
    transform: CanonicalTransform = dc_field(default_factory=identity_transform)
    object_sdf: SdfGrid | None = None
    seed_features: np.ndarray | None = None


def _decode(features: np.ndarray, skeleton: Skeleton):
    n = features.shape[0]
    j = skeleton.joint_count
    rot6d = features[:, : j * 6].reshape(n, j, 6)
    root = features[:, j * 6 : j * 6 + 3]
    contacts = features[:, j * 6 + 3 :] > 0.5
    cache = fk_forward(skeleton, sixd_to_matrix(rot6d), root)
    return rot6d, contacts, cache


def _to_world(ctx: GuidanceContext, points: np.ndarray) -> np.ndarray:
    return ctx.transform.invert_points(points)


def _world_grad_to_canonical(ctx: GuidanceContext, grad: np.ndarray) -> np.ndarray:
    # world = R(-yaw) canonical - t, so d(world)/d(canonical) = R(-yaw)
    rot = yaw_matrix(-ctx.transform.yaw)
    return grad @ rot


def guidance_phys(features: np.ndarray, ctx: GuidanceContext) -> tuple[float, np.ndarray]:
    """Foot contact/penetration objective against the terrain."""
    sk = ctx.skeleton
    rot6d, contacts, cache = _decode(features, sk)
    n = features.shape[0]

    feet_c = cache.positions[:, sk.foot_joints]            # canonical frame
    feet_w = _to_world(ctx, feet_c.reshape(-1, 3)).reshape(n, 4, 3)
    fx, fy, fz = feet_w[..., 0], feet_w[..., 1], feet_w[..., 2]
    h = height_at(ctx.terrain, fx, fz)
    dhdx, dhdz = height_gradient(ctx.terrain, fx, fz)
    resid = fy - h

    c = contacts.astype(np.float64)
    pairs = resid.size
    active = c + (1 - c) * (resid < 0)  # contacts always, otherwise only below
    hub, dhub = _huber(resid)
    value = float(np.sum(active * hub) / pairs)

    # d(term)/d(resid) per pair
    dr = active * dhub / pairs
    grad_w = np.zeros_like(feet_w)
    grad_w[..., 0] = -dr * dhdx
    grad_w[..., 1] = dr
    grad_w[..., 2] = -dr * dhdz

    grad_c = _world_grad_to_canonical(ctx, grad_w.reshape(-1, 3)).reshape(n, 4, 3)
    grad_positions = np.zeros((n, sk.joint_count, 3))
    grad_positions[:, sk.foot_joints] = grad_c
    return value, positions_gradient_to_features(sk, rot6d, cache, grad_positions)


def guidance_smooth(features: np.ndarray, ctx: GuidanceContext) -> tuple[float, np.ndarray]:
    """Mean squared consecutive joint displacement; damps jittery motion."""
    sk = ctx.skeleton
    rot6d, _, cache = _decode(features, sk)
    p = cache.positions
    if ctx.seed_features is not None and len(ctx.seed_features):
        _, _, seed_cache = _decode(np.asarray(ctx.seed_features, dtype=np.float64), sk)
        prefix = seed_cache.positions
        full = np.concatenate([prefix, p])
    else:
        prefix = None
        full = p
    if full.shape[0] < 2:
        raise ValueError("smoothness needs at least two frames")
    diff = full[1:] - full[:-1]
    count = diff.size  # pairs x joints x coordinates
    value = float(np.sum(diff**2) / count)

    grad_full = np.zeros_like(full)
    grad_full[1:] += 2.0 * diff / count
    grad_full[:-1] -= 2.0 * diff / count
    grad_positions = grad_full if prefix is None else grad_full[len(prefix):]
    return value, positions_gradient_to_features(sk, rot6d, cache, grad_positions)


def guidance_collision(features: np.ndarray, ctx: GuidanceContext) -> tuple[float, np.ndarray]:
    """Mean body-point penetration depth into an object SDF."""
    sk = ctx.skeleton
    rot6d, _, cache = _decode(features, sk)
    n = features.shape[0]
    pts_c = cache.positions.reshape(-1, 3)
    pts_w = _to_world(ctx, pts_c)
    sdf = ctx.object_sdf.sample(pts_w)
    count = len(pts_w)
    depth = np.maximum(-sdf, 0.0)
    hub, dhub = _huber(depth)
    value = float(np.sum(hub) / count)

    inside = sdf < 0
    grad_w = np.zeros_like(pts_w)
    if np.any(inside):
        grad_w[inside] = (
            -dhub[inside, None] * ctx.object_sdf.gradient(pts_w[inside]) / count
        )
    grad_c = _world_grad_to_canonical(ctx, grad_w)
    return value, positions_gradient_to_features(
        sk, rot6d, cache, grad_c.reshape(n, sk.joint_count, 3)
    )


def apply_guidance(x0: np.ndarray, spec: GuidanceSpec, ctx: GuidanceContext) -> np.ndarray:
    """Guided clean prediction H~0 = H0 - sum alpha_i grad J_i(H0).

    Objectives whose context is missing (no terrain, no SDF) are skipped.
    All-zero weights return the prediction unchanged (bit-equal).
    """
    spec.validate()
    if not spec.active:
        return x0
    update = np.zeros_like(x0)
    if spec.phys > 0 and ctx.terrain is not None:
        _, g = guidance_phys(x0, ctx)
        update += spec.phys * g
    if spec.smooth > 0 and x0.shape[0] >= 2:
        _, g = guidance_smooth(x0, ctx)
        update += spec.smooth * g
    if spec.collision > 0 and ctx.object_sdf is not None:
        _, g = guidance_collision(x0, ctx)
        update += spec.collision * g
    return x0 - update
