"""Fitting 60-frame motion clips onto 4x4 m terrain patches.

A clip is registered to a patch by aligning its first-frame root with the
patch center; a scalar vertical offset then registers heights. The fit
error sums three terms over foot joints j and frames i:

    E_contact     = sum c_j^i (h_j^i - f_j^i)^2
    E_penetration = sum (1 - c_j^i) max(h_j^i - (f_j^i - r), 0)
    E_jump        = sum 1_jump (1 - c_j^i) max((f_j^i - l) - h_j^i, 0)

with f the foot-joint height, h the (offset) patch height under the foot,
r the foot radius (the penetration term measures the effective foot
bottom), and l the jump height threshold. The contact term is quadratic
while the one-sided terms are linear; they are summed as printed.

RBF refinement deforms a patch so contact residuals vanish: a 2D
radial basis field with linear kernel |p - q| plus a low-order polynomial
tail is added to the grid. The affine tail needs three non-collinear
constraints; degenerate sets fall back to a constant tail, which keeps
the system solvable down to a single constraint.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoValidPatch, OutOfBounds, SingularSystem
from .heightfield import TerrainPatch, height_at
from .motion import MotionSegment
from .skeleton import Skeleton

JUMP_THRESHOLD = 0.3  # meters; terrain may not fall further below airborne feet

_MERGE_TOL = 1e-6     # constraint locations closer than this merge
_COLLINEAR_TOL = 1e-9


@dataclass(frozen=True)
class FitResult:
    patch_id: int
    source_id: str
    vertical_offset: float
    error_contact: float
    error_penetration: float
    error_jump: float

    @property
    def error_total(self) -> float:
        return self.error_contact + self.error_penetration + self.error_jump


@dataclass(frozen=True)
class ContactConstraint:
    """One required terrain height at a patch-local (x, z) location."""

    location: tuple[float, float]
    required_height: float
    frame: int
    foot: int


def _foot_tracks(skeleton: Skeleton, segment: MotionSegment, positions: np.ndarray):
    """Patch-local foot coordinates: first-frame root goes to patch center."""
    feet = positions[:, skeleton.foot_joints]  # (N, 4, 3)
    root0 = segment.root[0]
    rel_x = feet[..., 0] - root0[0]
    rel_z = feet[..., 2] - root0[2]
    return rel_x, rel_z, feet[..., 1]


def fit_error(
    skeleton: Skeleton,
    segment: MotionSegment,
    positions: np.ndarray,
    patch: TerrainPatch,
    offset: float,
    jump_threshold: float = JUMP_THRESHOLD,
    is_jump: bool = False,
    patch_id: int = 0,
) -> FitResult:
    """Fit error of a motion against one patch at a given vertical offset.

    Raises OutOfBounds if any foot projects outside the patch.
    """
    rel_x, rel_z, f = _foot_tracks(skeleton, segment, positions)
    h = height_at(patch.field, rel_x, rel_z) + offset
    c = segment.contacts.astype(np.float64)

    e_contact = float(np.sum(c * (h - f) ** 2))
    bottom = f - skeleton.foot_radius
    e_pen = float(np.sum((1.0 - c) * np.maximum(h - bottom, 0.0)))
    if is_jump:
        e_jump = float(np.sum((1.0 - c) * np.maximum((f - jump_threshold) - h, 0.0)))
    else:
        e_jump = 0.0
    return FitResult(
        patch_id=patch_id,
        source_id=patch.source_id,
        vertical_offset=float(offset),
        error_contact=e_contact,
        error_penetration=e_pen,
        error_jump=e_jump,
    )


def optimal_offset(
    skeleton: Skeleton,
    segment: MotionSegment,
    positions: np.ndarray,
    patch: TerrainPatch,
) -> float:
    """Vertical offset minimizing E_contact in closed form.

    E_contact is quadratic in the offset, so the minimizer is the mean
    contact residual f - h over labeled contacts. Without any contact
    labels the offset is 0.
    """
    rel_x, rel_z, f = _foot_tracks(skeleton, segment, positions)
    h = height_at(patch.field, rel_x, rel_z)
    c = segment.contacts.astype(np.float64)
    total = c.sum()
    if total == 0:
        return 0.0
    return float(np.sum(c * (f - h)) / total)


def patch_search(
    skeleton: Skeleton,
    segment: MotionSegment,
    positions: np.ndarray,
    bank: list[TerrainPatch],
    top: int = 3,
    jump_threshold: float = JUMP_THRESHOLD,
    is_jump: bool = False,
) -> list[FitResult]:
    """Brute-force search of a patch bank; the `top` best fits, ascending.

    Each patch is scored at its own closed-form vertical offset. Patches
    the motion walks off are skipped (infinite error); if every patch is
    out of bounds, NoValidPatch is raised. Ties break by ascending
    patch id (the index into the bank).
    """
    if not bank:
        raise NoValidPatch("empty patch bank")

    results = _search_batched(skeleton, segment, positions, bank, jump_threshold, is_jump)
    if results is None:
        results = []
        for pid, patch in enumerate(bank):
            try:
                off = optimal_offset(skeleton, segment, positions, patch)
                results.append(
                    fit_error(skeleton, segment, positions, patch, off,
                              jump_threshold, is_jump, patch_id=pid)
                )
            except OutOfBounds:
                continue
    if not results:
        raise NoValidPatch("motion leaves every patch in the bank")
    results.sort(key=lambda fr: (fr.error_total, fr.patch_id))
    return results[:top]


def _search_batched(skeleton, segment, positions, bank, jump_threshold, is_jump):
    """Vectorized scoring across a uniform-grid bank; None if grids differ."""
    first = bank[0].field
    for p in bank:
        f = p.field
        if (f.heights.shape != first.heights.shape or f.cell_size != first.cell_size
                or f.origin != first.origin):
            return None

    rel_x, rel_z, fh = _foot_tracks(skeleton, segment, positions)
    q = rel_x.size
    fx = (rel_x.reshape(-1) - first.origin[0]) / first.cell_size
    fz = (rel_z.reshape(-1) - first.origin[1]) / first.cell_size
    eps = 1e-9
    if (np.any(fx < -eps) or np.any(fx > first.cols - 1 + eps)
            or np.any(fz < -eps) or np.any(fz > first.rows - 1 + eps)):
        raise NoValidPatch("motion leaves every patch in the bank")

    c0 = np.clip(np.floor(fx).astype(np.int64), 0, first.cols - 2)
    r0 = np.clip(np.floor(fz).astype(np.int64), 0, first.rows - 2)
    tx = (fx - c0)[None, :]
    tz = (fz - r0)[None, :]
    stack = np.stack([p.field.heights for p in bank])  # (P, R, C)
    h00 = stack[:, r0, c0]
    h01 = stack[:, r0, c0 + 1]
    h10 = stack[:, r0 + 1, c0]
    h11 = stack[:, r0 + 1, c0 + 1]
    h = (h00 * (1 - tx) + h01 * tx) * (1 - tz) + (h10 * (1 - tx) + h11 * tx) * tz  # (P, Q)

    c = segment.contacts.astype(np.float64).reshape(1, q)
    f = fh.reshape(1, q)
    n_contact = c.sum()
    if n_contact == 0:
        offsets = np.zeros(len(bank))
    else:
        offsets = np.sum(c * (f - h), axis=1) / n_contact
    h = h + offsets[:, None]

    e_contact = np.sum(c * (h - f) ** 2, axis=1)
    e_pen = np.sum((1 - c) * np.maximum(h - (f - skeleton.foot_radius), 0.0), axis=1)
    if is_jump:
        e_jump = np.sum((1 - c) * np.maximum((f - jump_threshold) - h, 0.0), axis=1)
    else:
        e_jump = np.zeros(len(bank))

    return [
        FitResult(
            patch_id=pid,
            source_id=bank[pid].source_id,
            vertical_offset=float(offsets[pid]),
            error_contact=float(e_contact[pid]),
            error_penetration=float(e_pen[pid]),
            error_jump=float(e_jump[pid]),
        )
        for pid in range(len(bank))
    ]


def fit_and_refine(
    skeleton: Skeleton,
    segment: MotionSegment,
    positions: np.ndarray,
    bank: list[TerrainPatch],
    top: int = 3,
    jump_threshold: float = JUMP_THRESHOLD,
    is_jump: bool = False,
) -> tuple[list[FitResult], list[TerrainPatch]]:
    """Search the bank, then RBF-refine each winning patch so the motion's
    labeled contacts are met exactly (at the fit's vertical offset)."""
    results = patch_search(
        skeleton, segment, positions, bank, top, jump_threshold, is_jump
    )
    refined = []
    for fr in results:
        cons = contact_constraints(skeleton, segment, positions, fr.vertical_offset)
        refined.append(rbf_refine(bank[fr.patch_id], cons))
    return results, refined


def contact_constraints(
    skeleton: Skeleton,
    segment: MotionSegment,
    positions: np.ndarray,
    offset: float,
) -> list[ContactConstraint]:
    """One constraint per labeled contact: required patch height = f - offset."""
    rel_x, rel_z, f = _foot_tracks(skeleton, segment, positions)
    out = []
    for i in range(segment.frame_count):
        for j in range(4):
            if segment.contacts[i, j] == 1:
                out.append(
                    ContactConstraint(
                        location=(float(rel_x[i, j]), float(rel_z[i, j])),
                        required_height=float(f[i, j] - offset),
                        frame=i,
                        foot=j,
                    )
                )
    return out


def _merge_constraints(constraints):
    """Average required heights of constraints at coincident locations."""
    merged: list[list] = []
    for c in constraints:
        for m in merged:
            if (abs(m[0] - c.location[0]) < _MERGE_TOL
                    and abs(m[1] - c.location[1]) < _MERGE_TOL):
                m[2] += c.required_height
                m[3] += 1
                break
        else:
            merged.append([c.location[0], c.location[1], c.required_height, 1])
    pts = np.array([[m[0], m[1]] for m in merged])
    req = np.array([m[2] / m[3] for m in merged])
    return pts, req


def _collinear(pts: np.ndarray) -> bool:
    if len(pts) < 3:
        return True
    d = pts - pts[0]
    # largest cross-product magnitude among point pairs
    cross = np.abs(d[:, None, 0] * d[None, :, 1] - d[:, None, 1] * d[None, :, 0])
    span = max(np.abs(d).max(), 1.0)
    return cross.max() < _COLLINEAR_TOL * span * span


def solve_rbf(pts: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Linear-kernel RBF weights interpolating values at 2D points.

    Returns (w, b) with b the polynomial tail: affine [1, x, z] when the
    points span the plane, constant [1] otherwise (non-collinearity is
    what the affine block needs for solvability).
    """
    n = len(pts)
    dist = np.sqrt(np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1))
    if _collinear(pts):
        poly = np.ones((n, 1))
    else:
        poly = np.column_stack([np.ones(n), pts[:, 0], pts[:, 1]])
    m = poly.shape[1]
    sys = np.zeros((n + m, n + m))
    sys[:n, :n] = dist
    sys[:n, n:] = poly
    sys[n:, :n] = poly.T
    rhs = np.concatenate([values, np.zeros(m)])
    try:
        sol = np.linalg.solve(sys, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("degenerate constraint set after merging") from exc
    return sol[:n], sol[n:]


def eval_rbf(pts: np.ndarray, w: np.ndarray, b: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Evaluate a solve_rbf field at query points (Q, 2)."""
    d = np.sqrt(np.sum((query[:, None, :] - pts[None, :, :]) ** 2, axis=-1))
    out = d @ w + b[0]
    if len(b) == 3:
        out += query @ b[1:]
    return out


def _snap_to_constraints(field, pts, req, max_iters=200, tol=1e-9):
    """Nudge grid nodes so bilinear sampling meets each constraint exactly.

    The RBF field is exact at the constraints analytically, but sampling
    it onto grid nodes leaves a small bilinear discretization residual
    (worst near kernel centers inside a cell). Each pass distributes the
    remaining residual over the constraint's four cell nodes with
    minimal-norm weights; passes repeat until all residuals vanish.
    """
    heights = field.heights.copy()
    cell = field.cell_size
    fx = (pts[:, 0] - field.origin[0]) / cell
    fz = (pts[:, 1] - field.origin[1]) / cell
    c0 = np.clip(np.floor(fx).astype(np.int64), 0, field.cols - 2)
    r0 = np.clip(np.floor(fz).astype(np.int64), 0, field.rows - 2)
    tx = fx - c0
    tz = fz - r0
    w = np.stack([
        (1 - tx) * (1 - tz), tx * (1 - tz), (1 - tx) * tz, tx * tz,
    ], axis=1)  # (K, 4) weights for nodes (r0,c0),(r0,c0+1),(r1,c0),(r1,c1)
    wsq = np.sum(w * w, axis=1)
    for _ in range(max_iters):
        worst = 0.0
        for k in range(len(pts)):
            r, c = r0[k], c0[k]
            val = (heights[r, c] * w[k, 0] + heights[r, c + 1] * w[k, 1]
                   + heights[r + 1, c] * w[k, 2] + heights[r + 1, c + 1] * w[k, 3])
            resid = req[k] - val
            worst = max(worst, abs(resid))
            scale = resid / wsq[k]
            heights[r, c] += scale * w[k, 0]
            heights[r, c + 1] += scale * w[k, 1]
            heights[r + 1, c] += scale * w[k, 2]
            heights[r + 1, c + 1] += scale * w[k, 3]
        if worst < tol:
            break
    return heights


def rbf_refine(patch: TerrainPatch, constraints: list[ContactConstraint]) -> TerrainPatch:
    """Deform a patch so every contact constraint is met exactly.

    Solves the polyharmonic interpolation system on the constraint
    residuals, adds the resulting field to all grid nodes, then snaps the
    grid so bilinear sampling reproduces the constraints. Duplicate
    locations are merged by averaging their required heights first.
    """
    if not constraints:
        return patch

    pts, req = _merge_constraints(constraints)
    order = np.lexsort((pts[:, 1], pts[:, 0]))  # canonical order: permutation-invariant
    pts, req = pts[order], req[order]
    current = height_at(patch.field, pts[:, 0], pts[:, 1])
    w, b = solve_rbf(pts, req - current)

    field = patch.field
    xs = field.origin[0] + np.arange(field.cols) * field.cell_size
    zs = field.origin[1] + np.arange(field.rows) * field.cell_size
    gx, gz = np.meshgrid(xs, zs)
    nodes = np.stack([gx.reshape(-1), gz.reshape(-1)], axis=1)
    heights = field.heights + eval_rbf(pts, w, b, nodes).reshape(field.rows, field.cols)

    interim = type(field)(heights=heights, cell_size=field.cell_size, origin=field.origin)
    heights = _snap_to_constraints(interim, pts, req)
    new_field = type(field)(heights=heights, cell_size=field.cell_size, origin=field.origin)
    return TerrainPatch(field=new_field, source_id=patch.source_id, yaw=patch.yaw)
