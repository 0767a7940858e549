"""Egocentric terrain embedding: per-frame 12x12 goal-relative height grids.

Each frame samples a 1.2 x 1.2 m lattice centered on the root's ground
projection and rotated to the root's instantaneous heading. Values are
terrain height minus the goal height, so the whole embedding is invariant
to rigid yaw+translation applied jointly to terrain, motion, and goal.
The root's own height above the goal rides along as one extra scalar
per frame.
"""

from dataclasses import dataclass

import numpy as np

from .canonical import GoalFrame
from .heightfield import HeightField, height_at
from .motion import MotionSegment
from .rotations import sixd_to_matrix, yaw_of_matrix

GRID_SIZE = 12          # 144 sample points
GRID_EXTENT = 1.2       # meters

_AXIS = np.linspace(-GRID_EXTENT / 2, GRID_EXTENT / 2, GRID_SIZE)
# local offsets, row-major: rows along local z, cols along local x
_LOCAL_U, _LOCAL_V = np.meshgrid(_AXIS, _AXIS)


@dataclass(frozen=True)
class SceneEmbedding:
    """grid: (N, 12, 12) goal-relative heights; root_height_rel: (N,)."""

    grid: np.ndarray
    root_height_rel: np.ndarray

    @property
    def flat(self) -> np.ndarray:
        """(N, 145): row-major grid values plus the root height channel."""
        n = self.grid.shape[0]
        return np.concatenate(
            [self.grid.reshape(n, -1), self.root_height_rel[:, None]], axis=1
        )


def embedding_points(root_xz: np.ndarray, root_yaw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """World (x, z) of all grid points for roots (N, 2) and yaws (N,)."""
    cy = np.cos(root_yaw)[:, None, None]
    sy = np.sin(root_yaw)[:, None, None]
    u = _LOCAL_U[None]
    v = _LOCAL_V[None]
    x = root_xz[:, 0, None, None] + cy * u + sy * v
    z = root_xz[:, 1, None, None] - sy * u + cy * v
    return x, z


def sample_scene_embedding(
    field: HeightField, segment: MotionSegment, goal: GoalFrame
) -> SceneEmbedding:
    """Embedding for every frame of a segment.

    Raises OutOfBounds when a grid point leaves the field; callers must
    supply sufficient terrain (e.g. via heightfield.extend_edges) rather
    than rely on clamping.
    """
    root_mats = sixd_to_matrix(segment.rotations[:, 0])
    yaws = yaw_of_matrix(root_mats)
    return sample_scene_embedding_at(
        field, segment.root[:, [0, 2]], yaws, segment.root[:, 1], goal
    )


def sample_scene_embedding_at(
    field: HeightField,
    root_xz: np.ndarray,
    root_yaw: np.ndarray,
    root_height: np.ndarray,
    goal: GoalFrame,
) -> SceneEmbedding:
    """Embedding for explicit root tracks (used when frames are anticipated
    rather than known, e.g. during autoregressive sampling)."""
    x, z = embedding_points(np.asarray(root_xz, dtype=np.float64),
                            np.asarray(root_yaw, dtype=np.float64))
    goal_h = float(goal.position[1])
    grid = height_at(field, x, z) - goal_h
    rel = np.asarray(root_height, dtype=np.float64) - goal_h
    return SceneEmbedding(grid=grid, root_height_rel=rel)
