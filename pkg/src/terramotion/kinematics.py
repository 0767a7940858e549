"""Forward kinematics and its analytic backward pass.

The backward pass is the workhorse for inference guidance and lets any
scalar objective over joint positions push gradients back to the raw
motion features (6D rotations + root) without autodiff.
"""

from dataclasses import dataclass

import numpy as np

from .motion import MotionSegment
from .rotations import sixd_to_matrix, sixd_backward
from .skeleton import Skeleton


@dataclass(frozen=True)
class FKCache:
    """Intermediate state of an FK pass needed by fk_backward."""

    rot_mats: np.ndarray   # (N, J, 3, 3) local rotations
    globals_: np.ndarray   # (N, J, 3, 3) accumulated world rotations
    positions: np.ndarray  # (N, J, 3) world joint positions


def fk_forward(skeleton: Skeleton, rot_mats: np.ndarray, root: np.ndarray) -> FKCache:
    """FK from local rotation matrices (N, J, 3, 3) and root positions (N, 3)."""
    n, j = rot_mats.shape[0], skeleton.joint_count
    globals_ = np.empty((n, j, 3, 3), dtype=np.float64)
    positions = np.empty((n, j, 3), dtype=np.float64)
    globals_[:, 0] = rot_mats[:, 0]
    positions[:, 0] = root
    for i in range(1, j):
        par = skeleton.parents[i]
        positions[:, i] = positions[:, par] + globals_[:, par] @ skeleton.offsets[i]
        globals_[:, i] = globals_[:, par] @ rot_mats[:, i]
    return FKCache(rot_mats=rot_mats, globals_=globals_, positions=positions)


def forward_kinematics(skeleton: Skeleton, segment: MotionSegment) -> np.ndarray:
    """World positions (N, 22, 3) of every joint in every frame."""
    mats = sixd_to_matrix(segment.rotations)
    return fk_forward(skeleton, mats, segment.root).positions


def fk_backward(
    skeleton: Skeleton, cache: FKCache, grad_positions: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Pull d(loss)/d(positions) back to local rotations and root.

    Returns (grad_rot_mats (N, J, 3, 3), grad_root (N, 3)). Children are
    visited before parents (indices are topologically ordered), so each
    joint's accumulators are final when consumed.
    """
    n, j = grad_positions.shape[0], skeleton.joint_count
    g_pos = np.ascontiguousarray(grad_positions, dtype=np.float64).copy()
    g_glob = np.zeros((n, j, 3, 3), dtype=np.float64)
    g_rot = np.empty((n, j, 3, 3), dtype=np.float64)
    for i in range(j - 1, 0, -1):
        par = skeleton.parents[i]
        g_pos[:, par] += g_pos[:, i]
        # p_i = p_par + G_par @ off_i
        g_glob[:, par] += np.einsum("na,b->nab", g_pos[:, i], skeleton.offsets[i])
        # G_i = G_par @ R_i
        g_glob[:, par] += np.einsum("nab,ncb->nac", g_glob[:, i], cache.rot_mats[:, i])
        g_rot[:, i] = np.einsum("nba,nbc->nac", cache.globals_[:, par], g_glob[:, i])
    g_rot[:, 0] = g_glob[:, 0]
    return g_rot, g_pos[:, 0].copy()


def positions_gradient_to_features(
    skeleton: Skeleton,
    rotations_6d: np.ndarray,
    cache: FKCache,
    grad_positions: np.ndarray,
) -> np.ndarray:
    """d(loss)/d(flat features) from d(loss)/d(joint positions).

    Output is (N, FEATURE_DIM): 6D-rotation block, root block, and a zero
    contact block (contact labels are non-differentiable masks).
    """
    g_rot_mats, g_root = fk_backward(skeleton, cache, grad_positions)
    g_sixd = sixd_backward(rotations_6d, g_rot_mats)
    n = grad_positions.shape[0]
    return np.concatenate(
        [g_sixd.reshape(n, -1), g_root, np.zeros((n, 4), dtype=np.float64)], axis=1
    )
