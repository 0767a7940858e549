import numpy as np
import pytest

from terramotion.errors import NoValidPatch, OutOfBounds
from terramotion.fitting import (
    ContactConstraint,
    contact_constraints,
    eval_rbf,
    fit_error,
    optimal_offset,
    patch_search,
    rbf_refine,
    solve_rbf,
)
from terramotion.heightfield import HeightField, TerrainPatch, height_at
from terramotion.motion import rest_segment, MotionSegment
from terramotion.skeleton import default_skeleton
from terramotion.terrain_gen import PatchBankParams, generate_patch_bank

SK = default_skeleton()
FOOT = SK.foot_joints  # [7, 8, 10, 11]


def flat_patch(height=0.0, cell=0.5):
    n = int(round(4.0 / cell)) + 1
    field = HeightField(heights=np.full((n, n), height), cell_size=cell, origin=(-2.0, -2.0))
    return TerrainPatch(field=field, source_id="flat")


def make_case(n_frames, foot_heights, contacts, foot_xz=None):
    """Fabricated positions: foot joints placed exactly; root at origin."""
    seg = rest_segment(n_frames)
    seg = MotionSegment(
        rotations=seg.rotations,
        root=np.zeros((n_frames, 3)),
        contacts=np.asarray(contacts, dtype=np.int64),
    )
    positions = np.zeros((n_frames, 22, 3))
    positions[:, :, 1] = 1.0  # body out of the way
    for i in range(n_frames):
        for j in range(4):
            x, z = (0.1 * j, 0.1) if foot_xz is None else foot_xz[i][j]
            positions[i, FOOT[j]] = (x, foot_heights[i][j], z)
    return seg, positions


def test_perfect_contact_all_components_zero():
    seg, pos = make_case(2, [[0.0] * 4] * 2, [[1, 1, 1, 1]] * 2)
    fr = fit_error(SK, seg, pos, flat_patch(), offset=0.0)
    assert fr.error_contact == 0.0
    assert fr.error_penetration == 0.0
    assert fr.error_jump == 0.0
    assert fr.error_total == 0.0


def test_single_penetration_term():
    # non-contact foot bottom 0.05 m below terrain: f - r = -0.05 -> f = -0.03
    heights = [[-0.03, 0.0, 0.0, 0.0]]
    seg, pos = make_case(1, heights, [[0, 1, 1, 1]])
    fr = fit_error(SK, seg, pos, flat_patch(), offset=0.0)
    assert np.isclose(fr.error_penetration, 0.05)
    assert fr.error_contact == 0.0 and fr.error_jump == 0.0


def test_single_jump_term_at_threshold():
    # airborne foot 0.5 m above terrain with l = 0.3 leaves 0.2 of slack
    heights = [[0.5, 0.0, 0.0, 0.0]]
    seg, pos = make_case(1, heights, [[0, 1, 1, 1]])
    fr = fit_error(SK, seg, pos, flat_patch(), offset=0.0, jump_threshold=0.3, is_jump=True)
    assert np.isclose(fr.error_jump, 0.2)
    assert fr.error_contact == 0.0 and fr.error_penetration == 0.0
    # jump term only activates for jumping gaits
    fr2 = fit_error(SK, seg, pos, flat_patch(), offset=0.0, is_jump=False)
    assert fr2.error_jump == 0.0


def test_contact_residual_squared():
    heights = [[0.1, 0.0, 0.0, 0.0]]
    seg, pos = make_case(1, heights, [[1, 1, 1, 1]])
    fr = fit_error(SK, seg, pos, flat_patch(), offset=0.0)
    assert np.isclose(fr.error_contact, 0.1**2)


def test_scale_covariance():
    rng = np.random.default_rng(0)
    heights = rng.uniform(0.05, 0.2, size=(3, 4))
    contacts = rng.integers(0, 2, size=(3, 4))
    seg, pos = make_case(3, heights, contacts)
    seg2, pos2 = make_case(3, 2 * heights, contacts)
    a = fit_error(SK, seg, pos, flat_patch(), offset=0.0)
    b = fit_error(SK, seg2, pos2, flat_patch(), offset=0.0)
    assert np.isclose(b.error_contact, 4 * a.error_contact)
    # doubling heights doubles the clearance above the foot radius, which
    # enters the linear penetration term shifted by r
    seg3, pos3 = make_case(3, -heights, contacts ^ 1)
    seg4, pos4 = make_case(3, -2 * heights, contacts ^ 1)
    c = fit_error(SK, seg3, pos3, flat_patch(), offset=0.0)
    d = fit_error(SK, seg4, pos4, flat_patch(), offset=0.0)
    r = SK.foot_radius
    mask = (contacts ^ 1) == 0
    expect_c = np.sum((heights + r)[mask])
    expect_d = np.sum((2 * heights + r)[mask])
    assert np.isclose(c.error_penetration, expect_c)
    assert np.isclose(d.error_penetration, expect_d)


def test_offset_closed_form_minimizes_contact():
    rng = np.random.default_rng(1)
    heights = rng.uniform(-0.1, 0.3, size=(4, 4))
    contacts = rng.integers(0, 2, size=(4, 4))
    contacts[0, 0] = 1
    seg, pos = make_case(4, heights, contacts)
    patch = flat_patch()
    off = optimal_offset(SK, seg, pos, patch)
    base = fit_error(SK, seg, pos, patch, off).error_contact
    for delta in (-0.05, -0.01, 0.01, 0.05):
        assert fit_error(SK, seg, pos, patch, off + delta).error_contact >= base


def test_fit_error_components_nonnegative():
    rng = np.random.default_rng(8)
    bank = generate_patch_bank(31, PatchBankParams(count=5))
    for _ in range(20):
        seg, pos = _random_tracks(rng, 6)
        for patch in bank:
            fr = fit_error(SK, seg, pos, patch, offset=float(rng.normal()),
                           is_jump=bool(rng.integers(0, 2)))
            assert fr.error_contact >= 0
            assert fr.error_penetration >= 0
            assert fr.error_jump >= 0


def test_out_of_bounds_foot_raises():
    heights = [[0.0] * 4]
    seg, pos = make_case(1, heights, [[1, 1, 1, 1]], foot_xz=[[(5.0, 0.0)] * 4])
    with pytest.raises(OutOfBounds):
        fit_error(SK, seg, pos, flat_patch(), offset=0.0)


def _random_tracks(rng, n):
    heights = rng.uniform(-0.05, 0.25, size=(n, 4))
    contacts = rng.integers(0, 2, size=(n, 4))
    xz = [
        [(float(x), float(z)) for x, z in rng.uniform(-1.4, 1.4, size=(4, 2))]
        for _ in range(n)
    ]
    return make_case(n, heights, contacts, foot_xz=xz)


def test_patch_search_matches_exhaustive_oracle():
    bank = generate_patch_bank(77, PatchBankParams(count=100))
    rng = np.random.default_rng(2)
    seg, pos = _random_tracks(rng, 12)

    got = patch_search(SK, seg, pos, bank, top=3)

    oracle = []
    for pid, patch in enumerate(bank):
        off = optimal_offset(SK, seg, pos, patch)
        oracle.append(fit_error(SK, seg, pos, patch, off, patch_id=pid))
    oracle.sort(key=lambda fr: (fr.error_total, fr.patch_id))

    assert [g.patch_id for g in got] == [o.patch_id for o in oracle[:3]]
    for g, o in zip(got, oracle[:3]):
        assert np.isclose(g.error_total, o.error_total, rtol=0, atol=1e-12)
        assert np.isclose(g.vertical_offset, o.vertical_offset, rtol=0, atol=1e-12)


def test_patch_search_identical_patches_tie_break_by_id():
    patch = flat_patch()
    bank = [patch, patch, patch]
    seg, pos = make_case(2, [[0.0] * 4] * 2, [[1, 1, 1, 1]] * 2)
    got = patch_search(SK, seg, pos, bank, top=3)
    assert [g.patch_id for g in got] == [0, 1, 2]


def test_patch_search_prefers_matching_terrain():
    # flat-walking motion: flat patch must outrank a steep ramp
    n = int(round(4.0 / 0.5)) + 1
    axis = np.arange(n) * 0.5 - 2.0
    ramp = HeightField(heights=np.tile(axis, (n, 1)), cell_size=0.5, origin=(-2.0, -2.0))
    bank = [TerrainPatch(field=ramp, source_id="ramp"), flat_patch()]
    seg, pos = make_case(2, [[0.0] * 4] * 2, [[1, 1, 1, 1]] * 2)
    got = patch_search(SK, seg, pos, bank, top=2)
    assert got[0].source_id == "flat"
    assert got[0].error_total < got[1].error_total


def test_patch_search_exact_generating_patch_wins():
    bank = generate_patch_bank(5, PatchBankParams(count=20))
    target = bank[7]
    rng = np.random.default_rng(3)
    n = 10
    contacts = rng.integers(0, 2, size=(n, 4))
    contacts[:, 0] = 1
    xz = rng.uniform(-1.2, 1.2, size=(n, 4, 2))
    heights = np.zeros((n, 4))
    lift = 0.6  # keep airborne feet clear of every candidate patch
    for i in range(n):
        for j in range(4):
            h = height_at(target.field, xz[i, j, 0], xz[i, j, 1])
            heights[i, j] = h if contacts[i, j] else h + lift
    seg, pos = make_case(
        n, heights, contacts, foot_xz=[[tuple(p) for p in fr] for fr in xz]
    )
    got = patch_search(SK, seg, pos, bank, top=3)
    assert got[0].patch_id == 7
    assert got[0].error_total < 1e-6


def test_patch_search_all_out_of_bounds():
    seg, pos = make_case(1, [[0.0] * 4], [[1, 1, 1, 1]], foot_xz=[[(9.0, 9.0)] * 4])
    with pytest.raises(NoValidPatch):
        patch_search(SK, seg, pos, [flat_patch()])
    with pytest.raises(NoValidPatch):
        patch_search(SK, seg, pos, [])


def test_rbf_zero_residuals_patch_unchanged():
    patch = flat_patch(cell=0.25)
    cons = [
        ContactConstraint(location=(0.3, -0.4), required_height=0.0, frame=0, foot=0),
        ContactConstraint(location=(-0.8, 0.2), required_height=0.0, frame=1, foot=1),
        ContactConstraint(location=(0.5, 0.9), required_height=0.0, frame=2, foot=2),
    ]
    refined = rbf_refine(patch, cons)
    assert np.max(np.abs(refined.field.heights - patch.field.heights)) < 1e-9


def test_rbf_single_constraint_raises_exactly():
    patch = flat_patch(cell=0.25)
    cons = [ContactConstraint(location=(0.31, -0.47), required_height=0.10, frame=0, foot=0)]
    refined = rbf_refine(patch, cons)
    got = height_at(refined.field, 0.31, -0.47)
    assert np.isclose(got, 0.10, atol=1e-9)


def test_rbf_random_constraints_interpolation_exactness():
    rng = np.random.default_rng(4)
    base = generate_patch_bank(11, PatchBankParams(count=3))[1]
    cons = [
        ContactConstraint(
            location=(float(x), float(z)),
            required_height=float(height_at(base.field, x, z) + rng.normal(scale=0.05)),
            frame=i,
            foot=i % 4,
        )
        for i, (x, z) in enumerate(rng.uniform(-1.7, 1.7, size=(40, 2)))
    ]
    refined = rbf_refine(base, cons)
    for c in cons:
        got = height_at(refined.field, c.location[0], c.location[1])
        assert abs(got - c.required_height) < 1e-4


def test_rbf_permutation_invariant():
    rng = np.random.default_rng(5)
    base = flat_patch(cell=0.25)
    cons = [
        ContactConstraint(location=(float(x), float(z)), required_height=float(h), frame=i, foot=0)
        for i, (x, z, h) in enumerate(
            np.column_stack([rng.uniform(-1.5, 1.5, size=(10, 2)), rng.normal(scale=0.1, size=10)])
        )
    ]
    a = rbf_refine(base, cons)
    b = rbf_refine(base, cons[::-1])
    assert np.array_equal(a.field.heights, b.field.heights)


def test_rbf_duplicate_locations_merged_by_averaging():
    base = flat_patch(cell=0.25)
    cons = [
        ContactConstraint(location=(0.5, 0.5), required_height=0.2, frame=0, foot=0),
        ContactConstraint(location=(0.5, 0.5), required_height=0.4, frame=1, foot=0),
    ]
    refined = rbf_refine(base, cons)
    assert np.isclose(height_at(refined.field, 0.5, 0.5), 0.3, atol=1e-9)


def test_rbf_solver_matches_scipy_oracle():
    scipy_interp = pytest.importorskip("scipy.interpolate")
    rng = np.random.default_rng(6)
    pts = rng.uniform(-1.5, 1.5, size=(25, 2))
    vals = rng.normal(scale=0.1, size=25)
    w, b = solve_rbf(pts, vals)
    assert len(b) == 3  # affine tail for non-collinear points
    oracle = scipy_interp.RBFInterpolator(pts, vals, kernel="linear", degree=1)
    query = rng.uniform(-1.9, 1.9, size=(60, 2))
    assert np.max(np.abs(eval_rbf(pts, w, b, query) - oracle(query))) < 1e-8


def test_refined_patch_zeroes_contact_error():
    bank = generate_patch_bank(21, PatchBankParams(count=10))
    rng = np.random.default_rng(7)
    seg, pos = _random_tracks(rng, 8)
    results = patch_search(SK, seg, pos, bank, top=3)
    for fr in results:
        patch = bank[fr.patch_id]
        cons = contact_constraints(SK, seg, pos, fr.vertical_offset)
        refined = rbf_refine(patch, cons)
        again = fit_error(SK, seg, pos, refined, fr.vertical_offset, patch_id=fr.patch_id)
        assert again.error_contact < 1e-6
