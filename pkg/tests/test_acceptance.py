"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s`. The final criterion
trains the full desk-scale pipeline and takes the longest (well under
its two-hour budget on a commodity multicore CPU); everything else
finishes in seconds to minutes.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest
import torch

from terramotion.canonical import canonicalize_motion, decanonicalize_motion, goal_frame
from terramotion.config import PipelineConfig
from terramotion.fitting import (
    contact_constraints,
    fit_error,
    optimal_offset,
    patch_search,
    rbf_refine,
)
from terramotion.guidance import (
    GuidanceContext,
    GuidanceSpec,
    guidance_collision,
    guidance_phys,
    guidance_smooth,
)
from terramotion.heightfield import HeightField, TerrainPatch, height_at
from terramotion.kinematics import forward_kinematics
from terramotion.motion import (
    FEATURE_DIM,
    MotionSegment,
    features_from_segment,
    mirror_segment,
    rest_segment,
)
from terramotion.metrics import (
    contact_distance_metric,
    diversity,
    foot_skate,
    goal_error,
    penetration_metric,
)
from terramotion.objects import sphere_sdf_grid
from terramotion.pipeline import run_pipeline
from terramotion.rotations import (
    matrix_to_sixd,
    random_rotations,
    sixd_to_matrix,
)
from terramotion.sampling import (
    SEED_FRAMES,
    SEGMENT_FRAMES,
    DiffusionCondition,
    sample_future_features,
)
from terramotion.scene_embedding import sample_scene_embedding
from terramotion.schedule import cosine_schedule
from terramotion.skeleton import default_skeleton
from terramotion.styles import TEXT_DIM
from terramotion.terrain_gen import PatchBankParams, generate_patch_bank, generate_terrain
from terramotion.training import training_loss, training_loss_numpy

SK = default_skeleton()


def _passline(n, name):
    print(f"\nACCEPTANCE {n} ({name}): PASS")


def random_segments(count, frames, rng, spread=2.0):
    out = []
    for _ in range(count):
        mats = random_rotations(frames * 22, rng).reshape(frames, 22, 3, 3)
        out.append(
            MotionSegment(
                rotations=matrix_to_sixd(mats),
                root=rng.uniform(-spread, spread, size=(frames, 3)),
                contacts=rng.integers(0, 2, size=(frames, 4)),
            )
        )
    return out


def chain_oracle(skeleton, rot_mats, root):
    n, j = rot_mats.shape[:2]
    out = np.zeros((n, j, 3))
    for f in range(n):
        for joint in range(j):
            chain = []
            cur = joint
            while cur != -1:
                chain.append(cur)
                cur = skeleton.parents[cur]
            chain.reverse()
            pos = root[f].copy()
            rot = np.eye(3)
            for idx, cur in enumerate(chain):
                if idx > 0:
                    pos = pos + rot @ skeleton.offsets[cur]
                rot = rot @ rot_mats[f, cur]
            out[f, joint] = pos
    return out


def test_criterion_1_geometry_suite():
    t0 = time.time()
    rng = np.random.default_rng(1001)

    # 6D round trip on 1000 random rotations
    mats = random_rotations(1000, rng)
    back = sixd_to_matrix(matrix_to_sixd(mats))
    assert np.max(np.abs(back - mats)) < 1e-6

    # FK against an independent per-joint chain oracle
    seg = random_segments(1, 8, rng)[0]
    pos = forward_kinematics(SK, seg)
    oracle = chain_oracle(SK, sixd_to_matrix(seg.rotations), seg.root)
    assert np.max(np.abs(pos - oracle)) < 1e-6

    # mirroring involution
    for seg in random_segments(20, 6, rng):
        twice = mirror_segment(mirror_segment(seg))
        assert np.max(np.abs(twice.rotations - seg.rotations)) < 1e-6
        assert np.max(np.abs(twice.root - seg.root)) < 1e-6

    # canonicalization round trip on 1000 random segments
    worst = 0.0
    for seg in random_segments(1000, 2, rng):
        goal = goal_frame(*rng.uniform(-3, 3, size=3), *rng.normal(size=2))
        canon, t = canonicalize_motion(seg, goal)
        rec = decanonicalize_motion(canon, t)
        worst = max(worst, np.max(np.abs(rec.root - seg.root)),
                    np.max(np.abs(rec.rotations - seg.rotations)))
    assert worst < 1e-5

    elapsed = time.time() - t0
    assert elapsed < 10.0, f"geometry suite too slow: {elapsed:.1f}s"
    _passline(1, f"geometry suite, {elapsed:.1f}s")


def _fabricated_case(n_frames, foot_heights, contacts, foot_xz=None):
    seg = rest_segment(n_frames)
    seg = MotionSegment(
        rotations=seg.rotations,
        root=np.zeros((n_frames, 3)),
        contacts=np.asarray(contacts, dtype=np.int64),
    )
    positions = np.zeros((n_frames, 22, 3))
    positions[:, :, 1] = 1.0
    for i in range(n_frames):
        for j in range(4):
            x, z = (0.1 * j, 0.1) if foot_xz is None else foot_xz[i][j]
            positions[i, SK.foot_joints[j]] = (x, foot_heights[i][j], z)
    return seg, positions


def _flat_patch(height=0.0, cell=0.5):
    n = int(round(4.0 / cell)) + 1
    return TerrainPatch(
        field=HeightField(heights=np.full((n, n), height), cell_size=cell,
                          origin=(-2.0, -2.0)),
        source_id="flat",
    )


def test_criterion_2_fitting_suite():
    t0 = time.time()
    patch = _flat_patch()
    r = SK.foot_radius

    # ten constructed cases with hand-computed energies (exact within 1 ulp)
    cases = []
    # 1: perfect contact everywhere
    cases.append((([[0.0] * 4] * 2, [[1] * 4] * 2, 0.0, False), (0.0, 0.0, 0.0)))
    # 2: one non-contact foot, bottom 0.05 under terrain
    cases.append((([[r - 0.05, 0.2, 0.2, 0.2]], [[0, 1, 1, 1]], 0.0, False),
                  ((0.2) ** 2 * 3, 0.05, 0.0)))
    # 3: jump frame, foot 0.5 above with threshold 0.3
    cases.append((([[0.5, 0.0, 0.0, 0.0]], [[0, 1, 1, 1]], 0.0, True),
                  (0.0, 0.0, 0.2)))
    # 4: jump indicator off: same geometry, no jump energy
    cases.append((([[0.5, 0.0, 0.0, 0.0]], [[0, 1, 1, 1]], 0.0, False),
                  (0.0, 0.0, 0.0)))
    # 5: squared contact residual
    cases.append((([[0.1, 0.0, 0.0, 0.0]], [[1, 1, 1, 1]], 0.0, False),
                  (0.1 ** 2, 0.0, 0.0)))
    # 6: doubling a contact residual quadruples its energy
    cases.append((([[0.2, 0.0, 0.0, 0.0]], [[1, 1, 1, 1]], 0.0, False),
                  (0.2 ** 2, 0.0, 0.0)))
    # 7: vertical offset shifts the terrain under every foot
    cases.append((([[0.3] * 4] * 1, [[1] * 4] * 1, 0.3, False), (0.0, 0.0, 0.0)))
    # 8: offset creates uniform contact residual
    cases.append((([[0.0] * 4] * 1, [[1] * 4] * 1, 0.1, False),
                  (4 * 0.1 ** 2, 0.0, 0.0)))
    # 9: two penetrating airborne feet accumulate linearly
    cases.append((([[r - 0.03, r - 0.07, 0.5, 0.5]], [[0, 0, 0, 0]], 0.0, False),
                  (0.0, 0.10, 0.0)))
    # 10: mixed frame: one contact residual + one penetration
    cases.append((([[0.1, r - 0.05, 0.4, 0.4]], [[1, 0, 0, 0]], 0.0, False),
                  (0.1 ** 2, 0.05, 0.0)))

    for (heights, contacts, offset, is_jump), want in cases:
        seg, pos = _fabricated_case(len(heights), heights, contacts)
        fr = fit_error(SK, seg, pos, patch, offset, jump_threshold=0.3, is_jump=is_jump)
        got = (fr.error_contact, fr.error_penetration, fr.error_jump)
        for g, w in zip(got, want):
            assert abs(g - w) < 1e-12, (heights, contacts, got, want)
        assert abs(fr.error_total - sum(got)) < 1e-9

    # patch search equals the exhaustive-sort oracle on a bank of 100
    bank = generate_patch_bank(1002, PatchBankParams(count=100))
    rng = np.random.default_rng(1003)
    heights = rng.uniform(-0.05, 0.25, size=(12, 4))
    contacts = rng.integers(0, 2, size=(12, 4))
    xz = [[(float(a), float(b)) for a, b in rng.uniform(-1.4, 1.4, (4, 2))]
          for _ in range(12)]
    seg, pos = _fabricated_case(12, heights, contacts, foot_xz=xz)
    got = patch_search(SK, seg, pos, bank, top=3)
    oracle = sorted(
        (fit_error(SK, seg, pos, p, optimal_offset(SK, seg, pos, p), patch_id=i)
         for i, p in enumerate(bank)),
        key=lambda fr: (fr.error_total, fr.patch_id),
    )
    assert [g.patch_id for g in got] == [o.patch_id for o in oracle[:3]]

    # refinement meets every constraint and zeroes the contact energy
    for fr in got:
        cons = contact_constraints(SK, seg, pos, fr.vertical_offset)
        refined = rbf_refine(bank[fr.patch_id], cons)
        for c in cons:
            sampled = height_at(refined.field, c.location[0], c.location[1])
            assert abs(sampled - c.required_height) < 1e-4
        again = fit_error(SK, seg, pos, refined, fr.vertical_offset)
        assert again.error_contact < 1e-6

    elapsed = time.time() - t0
    assert elapsed < 30.0, f"fitting suite too slow: {elapsed:.1f}s"
    _passline(2, f"fitting suite, {elapsed:.1f}s")


def _directional_check(fun, x, grad, rng, dirs, eps=1e-5, rtol=1e-3):
    ok = 0
    for _ in range(dirs):
        d = rng.normal(size=x.shape)
        d[:, -4:] = 0.0
        d /= np.linalg.norm(d)
        fd = (fun(x + eps * d) - fun(x - eps * d)) / (2 * eps)
        an = float(np.sum(grad * d))
        assert abs(fd - an) <= rtol * max(abs(fd), abs(an), 1e-8), (fd, an)
        ok += 1
    return ok


def test_criterion_3_gradient_suite():
    t0 = time.time()
    rng = np.random.default_rng(1004)
    field = generate_terrain(1005, "fractal", size=12.0, amplitude=0.15)
    sdf = sphere_sdf_grid(radius=0.8, center=(0.0, 0.8, 0.0), half_extent=8.0, n=81)
    ctx_phys = GuidanceContext(skeleton=SK, terrain=field)
    ctx_sdf = GuidanceContext(skeleton=SK, object_sdf=sdf)

    def pose(n):
        mats = random_rotations(n * 22, rng).reshape(n, 22, 3, 3)
        seg = MotionSegment(
            rotations=matrix_to_sixd(mats),
            root=rng.uniform([4.5, 0.5, 4.5], [7.5, 1.2, 7.5], size=(n, 3)),
            contacts=rng.integers(0, 2, size=(n, 4)),
        )
        return features_from_segment(seg)

    for objective, ctx, shift in (
        (guidance_phys, ctx_phys, None),
        (guidance_smooth, ctx_phys, None),
        (guidance_collision, ctx_sdf, np.array([-6.0, 0.0, -6.0])),
    ):
        for _ in range(100):
            x = pose(2)
            if shift is not None:
                x[:, 132:135] += shift
            _, grad = objective(x, ctx)
            _directional_check(lambda f: objective(f, ctx)[0], x, grad, rng, dirs=3)

    # two-term training loss through differentiable FK
    for _ in range(100):
        a, b = pose(2), pose(2)
        xt = torch.from_numpy(a).requires_grad_(True)
        loss = training_loss(xt, torch.from_numpy(b), SK)
        loss.backward()
        grad = xt.grad.numpy()
        _directional_check(
            lambda f: training_loss_numpy(f, b, SK), a, grad, rng, dirs=3
        )

    elapsed = time.time() - t0
    assert elapsed < 120.0, f"gradient suite too slow: {elapsed:.1f}s"
    _passline(3, f"gradient suite, {elapsed:.1f}s")


def test_criterion_4_sampler_suite():
    t0 = time.time()
    cond = DiffusionCondition(
        scene=np.zeros((SEGMENT_FRAMES, 145)),
        text=np.zeros((SEGMENT_FRAMES, TEXT_DIM)),
        seed=features_from_segment(rest_segment(SEED_FRAMES)),
    )

    # single-step schedule returns the denoiser output exactly
    target = np.random.default_rng(0).normal(
        size=(SEGMENT_FRAMES - SEED_FRAMES, FEATURE_DIM)
    )
    out = sample_future_features(
        lambda x, n, c: target, cond, cosine_schedule(1), np.random.default_rng(1)
    )
    assert np.array_equal(out, target)

    # fixed-seed determinism is bit-identical
    sched = cosine_schedule(100)
    denoiser = lambda x, n, c: 0.9 * x
    a = sample_future_features(denoiser, cond, sched, np.random.default_rng(2))
    b = sample_future_features(denoiser, cond, sched, np.random.default_rng(2))
    assert np.array_equal(a, b)

    # zero-weight guidance is a no-op on the trajectory
    field = HeightField(np.zeros((41, 41)), 0.25, (-5.0, -5.0))
    ctx = GuidanceContext(skeleton=SK, terrain=field)
    c = sample_future_features(
        denoiser, cond, sched, np.random.default_rng(2),
        guidance=GuidanceSpec(phys=0, smooth=0, collision=0), guidance_ctx=ctx,
    )
    assert np.array_equal(a, c)

    # stitching: M segments give 40 + 30 (M-1) frames with bit-equal overlaps
    from terramotion.rollout import autoregressive_rollout, style_schedule_from_changes

    def walker(noisy, step, condition):
        last = condition.seed[-1]
        out = np.tile(last, (noisy.shape[0], 1))
        pos = last[132:135][[0, 2]].copy()
        for t in range(noisy.shape[0]):
            d = np.linalg.norm(pos)
            if d > 1e-9:
                pos *= max(d - 0.035, 0.0) / d
            out[t, 132], out[t, 134] = pos
            out[t, :6] = [1, 0, 0, 0, 1, 0]
        return out

    big = generate_terrain(0, "flat", size=12.0)
    res = autoregressive_rollout(
        walker, big, [goal_frame(8.0, 0.83, 6.0, 0.0, 1.0)],
        style_schedule_from_changes([(0, 1)], 500),
        cosine_schedule(5), np.random.default_rng(3), start=(6.0, 6.0, 0.0),
    )
    m = len(res.segments)
    assert m >= 2
    assert res.motion.frame_count == 40 + 30 * (m - 1)
    for s0, s1 in zip(res.segments[:-1], res.segments[1:]):
        assert np.array_equal(s1.rotations[:SEED_FRAMES], s0.rotations[-SEED_FRAMES:])
        assert np.array_equal(s1.root[:SEED_FRAMES], s0.root[-SEED_FRAMES:])

    elapsed = time.time() - t0
    _passline(4, f"sampler suite, {elapsed:.1f}s")


def test_criterion_5_scene_embedding_suite():
    t0 = time.time()

    # flat-terrain constancy: all 144 values equal the goal-relative height
    field = HeightField(np.full((81, 81), 0.4), 0.1, (-4.0, -4.0))
    seg = rest_segment(6, root=(0.3, 1.0, -0.2))
    for goal_h in (0.0, 0.4, 1.7):
        emb = sample_scene_embedding(field, seg, goal_frame(0, goal_h, 0, 0, 1))
        assert np.max(np.abs(emb.grid - (0.4 - goal_h))) < 1e-9

    # joint yaw+translation invariance (quarter turn is grid-exact)
    from terramotion.canonical import CanonicalTransform, apply_transform

    base = generate_terrain(1006, "fractal", size=16.0, cell_size=0.05, amplitude=0.2)
    rng = np.random.default_rng(1007)
    seg = random_segments(1, 5, rng, spread=0.8)[0]
    seg = MotionSegment(rotations=seg.rotations, root=seg.root + [8.0, 0, 8.0],
                        contacts=seg.contacts)
    goal = goal_frame(8.3, 0.2, 7.9, 0.6, 0.8)
    emb0 = sample_scene_embedding(base, seg, goal)

    t_world = CanonicalTransform(yaw=np.pi / 2, translation=-np.array([8.0, 0.0, 8.0]))
    seg_m = apply_transform(seg, t_world)
    gp = t_world.apply_points(goal.position[None])[0]
    gf = t_world.apply_points(np.array([[goal.facing[0], 0, goal.facing[1]]]))[0] \
        - t_world.apply_points(np.zeros((1, 3)))[0]
    goal_m = goal_frame(gp[0], gp[1], gp[2], gf[0], gf[2])

    n = 121
    axis = np.arange(n) * 0.05 - 3.0
    gx, gz = np.meshgrid(axis, axis)
    src = t_world.invert_points(
        np.stack([gx.reshape(-1), np.zeros(n * n), gz.reshape(-1)], axis=1)
    )
    moved = HeightField(
        heights=height_at(base, src[:, 0], src[:, 2]).reshape(n, n),
        cell_size=0.05, origin=(-3.0, -3.0),
    )
    emb1 = sample_scene_embedding(moved, seg_m, goal_m)
    assert np.max(np.abs(emb1.grid - emb0.grid)) < 1e-5

    elapsed = time.time() - t0
    _passline(5, f"scene-embedding suite, {elapsed:.1f}s")


def test_criterion_7_metrics_suite():
    t0 = time.time()
    flat = HeightField(np.zeros((41, 41)), 0.5, (-10.0, -10.0))

    # motion above terrain: zero penetration
    seg = rest_segment(4, root=(0.0, 2.0, 0.0))
    assert penetration_metric(seg, SK, flat) == 0.0

    # toes sunk 1 cm below their inflated bottoms: mean over 22 joints
    seg = rest_segment(3, root=(0.0, 0.0, 0.0))
    pos = forward_kinematics(SK, seg)
    toe_bottom = pos[0, 10, 1] - SK.foot_radius
    sunk = HeightField(np.full((41, 41), toe_bottom + 0.01), 0.5, (-10.0, -10.0))
    assert abs(penetration_metric(seg, SK, sunk) - 100 * 0.01 * 2 / 22) < 1e-9

    # contact distance: exact contact and a 3 cm hover
    seg = rest_segment(2, root=(0.0, 0.91, 0.0))
    heel_h = forward_kinematics(SK, seg)[0, 7, 1]
    contacts = np.zeros((2, 4), dtype=np.int64)
    contacts[:, :2] = 1
    seg = MotionSegment(rotations=seg.rotations, root=seg.root, contacts=contacts)
    on = HeightField(np.full((41, 41), heel_h), 0.5, (-10.0, -10.0))
    v, _ = contact_distance_metric(seg, SK, on)
    assert abs(v) < 1e-9
    hover = HeightField(np.full((41, 41), heel_h - 0.03), 0.5, (-10.0, -10.0))
    v, _ = contact_distance_metric(seg, SK, hover)
    assert abs(v - 3.0) < 1e-9

    # goal error: 5 cm off, facing flipped
    seg2 = rest_segment(3, root=(1.0, 0.9, 2.0))
    pos_cm, rot = goal_error(seg2, goal_frame(1.05, 0.9, 2.0, 0.0, -1.0))
    assert abs(pos_cm - 5.0) < 1e-9 and abs(rot - np.pi) < 1e-9

    # foot skate: 1 cm slide per contact frame; airborne slides are free
    seg3 = rest_segment(5, root=(0.0, 0.91, 0.0))
    roots = seg3.root.copy()
    roots[:, 0] = 0.01 * np.arange(5)
    sliding = MotionSegment(rotations=seg3.rotations, root=roots, contacts=seg3.contacts)
    assert abs(foot_skate(sliding, SK) - 1.0) < 1e-9
    airborne = MotionSegment(rotations=seg3.rotations, root=roots,
                             contacts=np.zeros((5, 4), dtype=np.int64))
    assert foot_skate(airborne, SK) == 0.0

    # diversity of two root-offset copies: closed form d sqrt(22 N)
    n, d = 9, 0.41
    a = rest_segment(n, root=(0.0, 0.9, 0.0))
    b = MotionSegment(rotations=a.rotations, root=a.root + [d, 0, 0], contacts=a.contacts)
    assert abs(diversity([a, b], SK) - d * np.sqrt(22 * n)) < 1e-6

    elapsed = time.time() - t0
    _passline(7, f"metrics suite, {elapsed:.1f}s")


def test_criterion_6_end_to_end_experiment(tmp_path):
    """Full desk experiment: train the toy denoiser and check goal errors
    and the guidance effect on held-out terrain/goal pairs."""
    t0 = time.time()
    cfg = PipelineConfig(
        seed=7,
        patch_count=400,        # >= 200 procedural terrain patches
        clip_count=150,
        styles=("walk", "run", "crouch", "jump"),  # >= 3 styles
        train_steps=6000,       # <= 50k steps
        width=96, layers=3, heads=4, ff_width=192, batch_size=24,
        eval_pairs=50,          # 50 held-out (terrain, goal) pairs
        max_segments=12,
    )
    out = Path(tmp_path) / "e2e"
    summary = run_pipeline(cfg, out, log=lambda *a: None)

    report_path = out / "eval" / "report.json"
    assert report_path.exists(), "report must be emitted automatically"
    written = json.loads(report_path.read_text())
    assert written["pairs"] == 50

    guided = summary["guided"]
    assert guided["goal_pos_cm"] <= 10.0, summary
    assert guided["goal_rot_rad"] <= 0.3, summary
    assert summary["penetration_reduction"] >= 0.30, summary
    assert summary["foot_skate_increase"] <= 0.10, summary

    elapsed = time.time() - t0
    assert elapsed < 7200.0, f"end-to-end exceeded its budget: {elapsed:.0f}s"
    _passline(6, f"end-to-end desk experiment, {elapsed / 60:.1f} min")
