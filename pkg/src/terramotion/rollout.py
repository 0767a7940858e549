"""Autoregressive goal-chasing rollout.

Each segment canonicalizes the trailing seed frames to the current goal,
samples the next 30 frames, and maps them back to the world. The goal
advances once the final frame's root lands within `goal_reach_eps` of it
horizontally; rollout ends when all goals are reached or the segment
budget runs out (partial motion is returned with a flag).

Scene grids for frames that do not exist yet are sampled along an
anticipated path: straight toward the goal at the active style's nominal
speed, stopping there. Seed frames use their true roots. Consecutive
segments share exactly the seed frames; the stitched motion keeps one
copy, so overlaps are bit-equal by construction.
"""

from dataclasses import dataclass

import numpy as np

from .canonical import GoalFrame, canonicalize_motion, decanonicalize_motion
from .guidance import GuidanceContext, GuidanceSpec
from .heightfield import HeightField, height_at
from .motion import MotionSegment, features_from_segment, rest_segment
from .rotations import sixd_to_matrix, yaw_of_matrix
from .sampling import (
    SEED_FRAMES,
    SEGMENT_FRAMES,
    DiffusionCondition,
    sample_segment,
)
from .scene_embedding import sample_scene_embedding_at
from .schedule import NoiseSchedule
from .skeleton import Skeleton, default_skeleton
from .styles import STYLE_BY_ID, codes_for_ids, style_codebook

GOAL_REACH_EPS = 0.15  # meters, horizontal


@dataclass(frozen=True)
class RolloutResult:
    motion: MotionSegment           # stitched world-frame motion
    completed: bool                 # all goals reached
    goals_reached: int
    segments: list[MotionSegment]   # per-segment world views (40 frames each)


def standing_seed(
    field: HeightField, x: float, z: float, heading: float,
    skeleton: Skeleton | None = None, frames: int = SEED_FRAMES,
) -> MotionSegment:
    """Rest-pose seed standing on the terrain at (x, z) facing `heading`."""
    from .rotations import matrix_to_sixd, yaw_matrix

    ground = float(height_at(field, x, z))
    seg = rest_segment(frames, root=(x, ground + 0.87, z))
    rot = seg.rotations.copy()
    rot[:, 0] = matrix_to_sixd(yaw_matrix(heading))
    return MotionSegment(rotations=rot, root=seg.root, contacts=seg.contacts, fps=seg.fps)


def style_schedule_from_changes(changes: list[tuple[int, int]], length: int) -> np.ndarray:
    """Per-frame style ids from (frame_start, style_id) change points."""
    if not changes:
        raise ValueError("need at least one style change point")
    changes = sorted(changes)
    out = np.zeros(length, dtype=np.int64)
    for start, sid in changes:
        out[max(0, start):] = sid
    return out


def _schedule_at(style_ids: np.ndarray, index: int) -> int:
    return int(style_ids[min(index, len(style_ids) - 1)])


def _anticipated_track(field, start_xz, start_y, goal: GoalFrame, style, frames, fps):
    """Root (xz, yaw, height) along a straight approach to the goal."""
    to_goal = goal.position[[0, 2]] - start_xz
    dist = float(np.linalg.norm(to_goal))
    direction = to_goal / dist if dist > 1e-9 else np.array([0.0, 1.0])
    speed = 0.5 * (style.speed[0] + style.speed[1])
    xz = np.empty((frames, 2))
    yaw = np.empty(frames)
    for t in range(frames):
        advance = min(dist, speed * (t + 1) / fps)
        xz[t] = start_xz + direction * advance
        remaining = dist - advance
        yaw[t] = (
            float(np.arctan2(direction[0], direction[1]))
            if remaining > GOAL_REACH_EPS
            else goal.yaw
        )
    height = height_at(field, xz[:, 0], xz[:, 1]) + style.root_height
    return xz, yaw, height


def autoregressive_rollout(
    denoiser,
    field: HeightField,
    goals: list[GoalFrame],
    style_ids: np.ndarray,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
    seed_motion: MotionSegment | None = None,
    start: tuple[float, float, float] | None = None,
    guidance: GuidanceSpec | None = None,
    skeleton: Skeleton | None = None,
    max_segments: int = 20,
    goal_reach_eps: float = GOAL_REACH_EPS,
    codebook: np.ndarray | None = None,
    fps: float = 30.0,
) -> RolloutResult:
    """Chase `goals` in order; see module docstring for the contract."""
    if not goals:
        raise ValueError("need at least one goal")
    sk = skeleton or default_skeleton()
    if codebook is None:
        codebook = style_codebook()
    if seed_motion is None:
        if start is None:
            raise ValueError("provide seed_motion or a start (x, z, heading)")
        seed_motion = standing_seed(field, start[0], start[1], start[2], sk)
    k = seed_motion.frame_count
    future_frames = SEGMENT_FRAMES - k

    world_rot = [seed_motion.rotations]
    world_root = [seed_motion.root]
    world_con = [seed_motion.contacts]
    segments: list[MotionSegment] = []

    goal_idx = 0
    total_frames = k
    completed = False

    for _ in range(max_segments):
        goal = goals[goal_idx]
        tail = MotionSegment(
            rotations=np.concatenate(world_rot)[-k:],
            root=np.concatenate(world_root)[-k:],
            contacts=np.concatenate(world_con)[-k:],
            fps=fps,
        )
        canon_seed, transform = canonicalize_motion(tail, goal)

        seed_yaw = yaw_of_matrix(sixd_to_matrix(tail.rotations[:, 0]))
        frame0 = total_frames - k
        style_now = STYLE_BY_ID[_schedule_at(style_ids, frame0 + k)]
        ant_xz, ant_yaw, ant_h = _anticipated_track(
            field, tail.root[-1][[0, 2]], tail.root[-1][1], goal,
            style_now, future_frames, fps,
        )
        emb = sample_scene_embedding_at(
            field,
            np.concatenate([tail.root[:, [0, 2]], ant_xz]),
            np.concatenate([seed_yaw, ant_yaw]),
            np.concatenate([tail.root[:, 1], ant_h]),
            goal,
        )
        ids = np.array(
            [_schedule_at(style_ids, frame0 + t) for t in range(SEGMENT_FRAMES)]
        )
        condition = DiffusionCondition(
            scene=emb.flat,
            text=codes_for_ids(ids, codebook),
            seed=features_from_segment(canon_seed),
        )
        ctx = GuidanceContext(
            skeleton=sk, terrain=field, transform=transform,
            seed_features=condition.seed,
        )
        canon_out = sample_segment(
            denoiser, condition, schedule, rng, guidance, ctx, fps=fps
        )
        world_out = decanonicalize_motion(canon_out, transform)

        future = world_out.window(k, future_frames)
        world_rot.append(future.rotations)
        world_root.append(future.root)
        world_con.append(future.contacts)
        total_frames += future_frames
        segments.append(
            MotionSegment(
                rotations=np.concatenate([tail.rotations, future.rotations]),
                root=np.concatenate([tail.root, future.root]),
                contacts=np.concatenate([tail.contacts, future.contacts]),
                fps=fps,
            )
        )

        final_xz = future.root[-1][[0, 2]]
        while goal_idx < len(goals) and np.linalg.norm(
            goals[goal_idx].position[[0, 2]] - final_xz
        ) < goal_reach_eps:
            goal_idx += 1
        if goal_idx == len(goals):
            completed = True
            break

    motion = MotionSegment(
        rotations=np.concatenate(world_rot),
        root=np.concatenate(world_root),
        contacts=np.concatenate(world_con),
        fps=fps,
    )
    return RolloutResult(
        motion=motion,
        completed=completed,
        goals_reached=goal_idx,
        segments=segments,
    )
