"""Rotation representations: 6D continuous form, matrices, yaw helpers.

A 6D rotation stores the first two columns of a rotation matrix as
(a1x, a1y, a1z, a2x, a2y, a2z). Decoding runs Gram-Schmidt on the two
columns and completes the basis with a cross product, so any pair of
linearly independent columns maps to a proper rotation.

Convention used everywhere: right-handed, +Y up, ground plane XZ.
Yaw is a rotation about +Y; yaw 0 faces +Z and positive yaw turns
+Z toward +X (facing vector = (sin yaw, cos yaw) in the XZ plane).
"""

import numpy as np

from .errors import DegenerateRotation, NotARotation

_EPS = 1e-8


def sixd_to_matrix(r: np.ndarray) -> np.ndarray:
    """Decode 6D rotations (..., 6) to matrices (..., 3, 3) via Gram-Schmidt.

    Raises DegenerateRotation if either column is near zero or the two
    columns are parallel; degenerate inputs are never silently repaired.
    """
    r = np.asarray(r, dtype=np.float64)
    a1, a2 = r[..., :3], r[..., 3:]

    n1 = np.linalg.norm(a1, axis=-1, keepdims=True)
    if np.any(n1 < _EPS):
        raise DegenerateRotation("first 6D column has near-zero norm")
    c1 = a1 / n1

    u = a2 - np.sum(a2 * c1, axis=-1, keepdims=True) * c1
    n2 = np.linalg.norm(u, axis=-1, keepdims=True)
    if np.any(n2 < _EPS):
        raise DegenerateRotation("6D columns are parallel or second is near-zero")
    c2 = u / n2

    c3 = np.cross(c1, c2)
    return np.stack([c1, c2, c3], axis=-1)


def matrix_to_sixd(mat: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Encode rotation matrices (..., 3, 3) as 6D (..., 6): first two columns.

    Raises NotARotation when the input is not orthonormal with det +1
    within `tol` (reflections are rejected).
    """
    mat = np.asarray(mat, dtype=np.float64)
    gram = np.einsum("...ij,...ik->...jk", mat, mat)
    eye = np.eye(3)
    if np.max(np.abs(gram - eye)) > tol:
        raise NotARotation("matrix is not orthonormal")
    if np.any(np.linalg.det(mat) < 0.0):
        raise NotARotation("matrix has determinant -1 (reflection)")
    return np.concatenate([mat[..., :, 0], mat[..., :, 1]], axis=-1)


def reorthonormalize_sixd(r: np.ndarray) -> np.ndarray:
    """Snap 6D values to exact rotations: decode and re-encode."""
    return matrix_to_sixd(sixd_to_matrix(r), tol=np.inf)


def identity_sixd(shape: tuple = ()) -> np.ndarray:
    """6D identity rotations with the given leading shape."""
    out = np.zeros(shape + (6,), dtype=np.float64)
    out[..., 0] = 1.0
    out[..., 4] = 1.0
    return out


def yaw_matrix(yaw) -> np.ndarray:
    """Rotation matrix (..., 3, 3) about +Y by `yaw` radians."""
    yaw = np.asarray(yaw, dtype=np.float64)
    c, s = np.cos(yaw), np.sin(yaw)
    zero, one = np.zeros_like(c), np.ones_like(c)
    rows = [
        np.stack([c, zero, s], axis=-1),
        np.stack([zero, one, zero], axis=-1),
        np.stack([-s, zero, c], axis=-1),
    ]
    return np.stack(rows, axis=-2)


def yaw_of_matrix(mat: np.ndarray) -> np.ndarray:
    """Ground-plane heading of a rotation: yaw of its rotated +Z axis."""
    mat = np.asarray(mat, dtype=np.float64)
    return np.arctan2(mat[..., 0, 2], mat[..., 2, 2])


def facing_to_yaw(facing: np.ndarray) -> np.ndarray:
    """Yaw whose facing vector (x, z) matches `facing` (..., 2)."""
    facing = np.asarray(facing, dtype=np.float64)
    return np.arctan2(facing[..., 0], facing[..., 1])


def yaw_to_facing(yaw) -> np.ndarray:
    """Unit facing vector (x, z) of a yaw angle."""
    yaw = np.asarray(yaw, dtype=np.float64)
    return np.stack([np.sin(yaw), np.cos(yaw)], axis=-1)


def axis_angle_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a (normalized) axis; used widely in tests."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    x, y, z = axis
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def random_rotations(n: int, rng: np.random.Generator) -> np.ndarray:
    """n uniform-ish random rotation matrices via random axis-angle."""
    axes = rng.normal(size=(n, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    angles = rng.uniform(-np.pi, np.pi, size=n)
    return np.stack([axis_angle_matrix(a, t) for a, t in zip(axes, angles)])


def sixd_backward(r: np.ndarray, grad_mat: np.ndarray) -> np.ndarray:
    """Gradient of a scalar through sixd_to_matrix.

    Given d(loss)/d(matrix) as (..., 3, 3), returns d(loss)/d(6D) as
    (..., 6). Mirrors the Gram-Schmidt forward pass exactly.
    """
    r = np.asarray(r, dtype=np.float64)
    a1, a2 = r[..., :3], r[..., 3:]

    n1 = np.linalg.norm(a1, axis=-1, keepdims=True)
    c1 = a1 / n1
    d = np.sum(a2 * c1, axis=-1, keepdims=True)
    u = a2 - d * c1
    n2 = np.linalg.norm(u, axis=-1, keepdims=True)
    c2 = u / n2

    g1 = grad_mat[..., :, 0]
    g2 = grad_mat[..., :, 1]
    g3 = grad_mat[..., :, 2]

    # c3 = c1 x c2 routes g3 into both columns
    gc1 = g1 + np.cross(c2, g3)
    gc2 = g2 + np.cross(g3, c1)

    # c2 = u / |u|
    gu = (gc2 - np.sum(gc2 * c2, axis=-1, keepdims=True) * c2) / n2

    # u = a2 - (c1.a2) c1
    ga2 = gu - np.sum(gu * c1, axis=-1, keepdims=True) * c1
    gc1 = gc1 - np.sum(gu * c1, axis=-1, keepdims=True) * a2 - d * gu

    # c1 = a1 / |a1|
    ga1 = (gc1 - np.sum(gc1 * c1, axis=-1, keepdims=True) * c1) / n1

    return np.concatenate([ga1, ga2], axis=-1)
