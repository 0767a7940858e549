import numpy as np
import pytest

from terramotion.errors import DenoiserShapeMismatch
from terramotion.guidance import GuidanceContext, GuidanceSpec, no_guidance
from terramotion.heightfield import HeightField
from terramotion.motion import FEATURE_DIM, features_from_segment, rest_segment
from terramotion.sampling import (
    SEED_FRAMES,
    SEGMENT_FRAMES,
    DiffusionCondition,
    sample_future_features,
    sample_segment,
)
from terramotion.schedule import cosine_schedule, forward_noise, posterior_mean
from terramotion.skeleton import default_skeleton
from terramotion.styles import TEXT_DIM


def make_condition(n=SEGMENT_FRAMES, k=SEED_FRAMES):
    seed = features_from_segment(rest_segment(k))
    return DiffusionCondition(
        scene=np.zeros((n, 145)),
        text=np.zeros((n, TEXT_DIM)),
        seed=seed,
    )


def oracle_denoiser(target):
    def fn(noisy, step, condition):
        return target

    return fn


def test_cosine_schedule_invariants():
    s = cosine_schedule(100)
    assert s.steps == 100
    assert np.all(s.betas > 0) and np.all(s.betas < 1)
    assert np.all(np.diff(s.alpha_bars) < 0)
    assert s.alpha_bars[0] > 0.99  # first step barely noises
    assert s.posterior_variance[0] == 0.0  # no noise at the final step


def test_forward_noise_small_at_step_zero():
    s = cosine_schedule(100)
    rng = np.random.default_rng(0)
    x0 = np.ones((30, FEATURE_DIM))
    xn = forward_noise(x0, 0, s, rng)
    assert np.max(np.abs(xn - x0)) < 6 * np.sqrt(1 - s.alpha_bars[0])


def test_forward_noise_deterministic_and_mc_variance():
    s = cosine_schedule(100)
    a = forward_noise(np.zeros((4, 8)), 50, s, np.random.default_rng(9))
    b = forward_noise(np.zeros((4, 8)), 50, s, np.random.default_rng(9))
    assert np.array_equal(a, b)

    # variance of (x_n - sqrt(ab) x0) over 1e5 draws matches 1 - ab within 1%
    rng = np.random.default_rng(1)
    x0 = rng.normal(size=(10,))
    n = 70
    draws = np.stack([forward_noise(x0, n, s, rng) for _ in range(10_000)])
    resid = draws - np.sqrt(s.alpha_bars[n]) * x0
    var = resid.var()
    assert abs(var - (1 - s.alpha_bars[n])) < 0.01 * (1 - s.alpha_bars[n])


def test_posterior_mean_interpolates_endpoints():
    s = cosine_schedule(100)
    x0 = np.full((2, 3), 2.0)
    xn = np.full((2, 3), -1.0)
    mu = posterior_mean(s, x0, xn, 50)
    lo, hi = min(-1.0, 2.0), max(-1.0, 2.0)
    assert np.all(mu >= lo - 1e-9) and np.all(mu <= hi + 1e-9)
    # at n=0 the posterior collapses onto x0
    mu0 = posterior_mean(s, x0, xn, 0)
    assert np.allclose(mu0, x0, atol=1e-6)


def test_oracle_denoiser_fixed_point():
    cond = make_condition()
    target = features_from_segment(rest_segment(SEGMENT_FRAMES - SEED_FRAMES))
    sched = cosine_schedule(100)
    out = sample_future_features(
        oracle_denoiser(target), cond, sched, np.random.default_rng(3)
    )
    # the final step returns the (guided) prediction exactly
    assert np.array_equal(out, target)


def test_single_step_schedule_returns_denoiser_output():
    cond = make_condition()
    target = np.random.default_rng(4).normal(size=(SEGMENT_FRAMES - SEED_FRAMES, FEATURE_DIM))
    sched = cosine_schedule(1)
    out = sample_future_features(
        oracle_denoiser(target), cond, sched, np.random.default_rng(5)
    )
    assert np.array_equal(out, target)


def test_single_step_with_guidance_returns_guided_output():
    from terramotion.guidance import apply_guidance
    from terramotion.motion import features_from_segment as feats

    sk = default_skeleton()
    field = HeightField(heights=np.zeros((41, 41)), cell_size=0.25, origin=(-5.0, -5.0))
    ctx = GuidanceContext(skeleton=sk, terrain=field)
    cond = make_condition()
    target = feats(rest_segment(SEGMENT_FRAMES - SEED_FRAMES, root=(0.0, 0.85, 0.0)))
    target[:, -4:] = [1, 1, 0, 0]
    spec = GuidanceSpec(phys=3.0, smooth=0.0, collision=0.0)

    out = sample_future_features(
        oracle_denoiser(target), cond, cosine_schedule(1),
        np.random.default_rng(6), guidance=spec, guidance_ctx=ctx,
    )
    assert np.array_equal(out, apply_guidance(target, spec, ctx))


def test_sampler_bit_identical_determinism():
    cond = make_condition()
    sched = cosine_schedule(50)

    def denoiser(noisy, step, condition):
        return 0.9 * noisy  # arbitrary deterministic map

    a = sample_future_features(denoiser, cond, sched, np.random.default_rng(7))
    b = sample_future_features(denoiser, cond, sched, np.random.default_rng(7))
    assert np.array_equal(a, b)


def test_zero_weight_guidance_is_noop_trajectory():
    cond = make_condition()
    sched = cosine_schedule(20)
    sk = default_skeleton()
    field = HeightField(heights=np.zeros((41, 41)), cell_size=0.25, origin=(-5.0, -5.0))
    ctx = GuidanceContext(skeleton=sk, terrain=field)

    def denoiser(noisy, step, condition):
        return 0.5 * noisy

    base = sample_future_features(denoiser, cond, sched, np.random.default_rng(8))
    zero = sample_future_features(
        denoiser, cond, sched, np.random.default_rng(8),
        guidance=GuidanceSpec(phys=0.0, smooth=0.0, collision=0.0), guidance_ctx=ctx,
    )
    assert np.array_equal(base, zero)


def test_sample_segment_seed_frames_bit_equal():
    cond = make_condition()
    sched = cosine_schedule(10)
    target = features_from_segment(rest_segment(SEGMENT_FRAMES - SEED_FRAMES))
    seg = sample_segment(
        oracle_denoiser(target), cond, sched, np.random.default_rng(9)
    )
    assert seg.frame_count == SEGMENT_FRAMES
    seed_feats = features_from_segment(seg.window(0, SEED_FRAMES))
    assert np.array_equal(seed_feats, cond.seed)
    seg.validate()


def test_denoiser_shape_mismatch_raises():
    cond = make_condition()
    sched = cosine_schedule(5)

    def bad(noisy, step, condition):
        return noisy[:-1]

    with pytest.raises(DenoiserShapeMismatch):
        sample_future_features(bad, cond, sched, np.random.default_rng(10))
