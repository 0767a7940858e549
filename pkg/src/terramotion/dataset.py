"""Training-set construction and the binary shard format.

Every 60-frame clip yields overlapping 40-frame windows (stride 10).
Each window is paired with the clip's three best-fitted refined terrains
and with the mirrored variant of each pairing, giving 3 x 3 x 2 samples
per clip. A window's goal is its own final-frame root position and
facing, so canonical samples always end at the origin facing +Z; the
model learns goal reaching as convergence to the origin.

Shard format TRS1: magic b"TRS1", u32 version, then length-prefixed
records (u32 byte length followed by the payload): u32 frames, u32
feature_dim, u32 scene_dim, f32 features, f32 scene grids, u8 per-frame
style ids, f64 canonical transform (yaw, tx, ty, tz).
"""

import struct
from dataclasses import dataclass

import numpy as np

from .canonical import CanonicalTransform, GoalFrame, canonicalize_motion
from .datagen import ClipRecord
from .fitting import FitResult
from .heightfield import TerrainPatch, extend_edges, mirror_x, raise_by, translate
from .motion import FEATURE_DIM, MotionSegment, features_from_segment, mirror_segment
from .rotations import sixd_to_matrix, yaw_of_matrix, yaw_to_facing
from .sampling import SEED_FRAMES, SEGMENT_FRAMES
from .scene_embedding import sample_scene_embedding
from .styles import codes_for_ids

SHARD_MAGIC = b"TRS1"
SHARD_VERSION = 1
WINDOW_STRIDE = 10
SCENE_DIM = 145
EMBED_PAD = 1.2  # meters of edge padding so root-centered grids stay in bounds


@dataclass(frozen=True)
class ClipFit:
    """One clip's best-fitted terrains, refined and offset-registered."""

    clip_index: int
    results: list[FitResult]
    refined: list[TerrainPatch]


@dataclass(frozen=True)
class TrainingSample:
    features: np.ndarray    # (40, FEATURE_DIM) canonical, float32
    scene: np.ndarray       # (40, 145) float32
    style_ids: np.ndarray   # (40,) uint8
    transform: np.ndarray   # (4,) float64: yaw, tx, ty, tz


def window_starts(clip_frames: int, window: int = SEGMENT_FRAMES,
                  stride: int = WINDOW_STRIDE) -> list[int]:
    return list(range(0, clip_frames - window + 1, stride))


def segment_goal(segment: MotionSegment) -> GoalFrame:
    """A motion's own endpoint as a goal: final root position + facing."""
    yaw = float(yaw_of_matrix(sixd_to_matrix(segment.rotations[-1, 0])))
    return GoalFrame(position=segment.root[-1].copy(), facing=yaw_to_facing(yaw))


def world_terrain(patch: TerrainPatch, fit: FitResult, root0: np.ndarray):
    """Express a fitted patch in the clip's world frame, offset applied."""
    field = raise_by(patch.field, fit.vertical_offset)
    return translate(field, float(root0[0]), float(root0[2]))


def build_window_sample(
    window: MotionSegment, field, style_id: int
) -> TrainingSample:
    goal = segment_goal(window)
    canon, transform = canonicalize_motion(window, goal)
    emb = sample_scene_embedding(field, window, goal)
    return TrainingSample(
        features=features_from_segment(canon).astype(np.float32),
        scene=emb.flat.astype(np.float32),
        style_ids=np.full(window.frame_count, style_id, dtype=np.uint8),
        transform=np.array(
            [transform.yaw, *transform.translation], dtype=np.float64
        ),
    )


def build_training_set(
    clips: list[ClipRecord],
    fits: list[ClipFit],
    mirror: bool = True,
) -> list[TrainingSample]:
    samples: list[TrainingSample] = []
    for fit in fits:
        clip = clips[fit.clip_index]
        root0 = clip.segment.root[0]
        for result, refined in zip(fit.results, fit.refined):
            field = extend_edges(world_terrain(refined, result, root0), EMBED_PAD)
            field_m = mirror_x(field) if mirror else None
            for start in window_starts(clip.segment.frame_count):
                window = clip.segment.window(start, SEGMENT_FRAMES)
                samples.append(build_window_sample(window, field, clip.style_id))
                if mirror:
                    samples.append(
                        build_window_sample(
                            mirror_segment(window), field_m, clip.style_id
                        )
                    )
    return samples


def save_shard(path, samples: list[TrainingSample]) -> None:
    with open(path, "wb") as fh:
        fh.write(SHARD_MAGIC)
        fh.write(struct.pack("<I", SHARD_VERSION))
        for s in samples:
            frames = s.features.shape[0]
            payload = (
                struct.pack("<III", frames, s.features.shape[1], s.scene.shape[1])
                + s.features.astype("<f4").tobytes()
                + s.scene.astype("<f4").tobytes()
                + s.style_ids.astype(np.uint8).tobytes()
                + s.transform.astype("<f8").tobytes()
            )
            fh.write(struct.pack("<I", len(payload)))
            fh.write(payload)


def load_shard(path) -> list[TrainingSample]:
    samples = []
    with open(path, "rb") as fh:
        if fh.read(4) != SHARD_MAGIC:
            raise ValueError("not a TRS1 training shard")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != SHARD_VERSION:
            raise ValueError(f"unsupported shard version {version}")
        while True:
            head = fh.read(4)
            if not head:
                break
            (length,) = struct.unpack("<I", head)
            payload = fh.read(length)
            frames, fdim, sdim = struct.unpack("<III", payload[:12])
            off = 12
            feats = np.frombuffer(payload, dtype="<f4", count=frames * fdim, offset=off)
            off += frames * fdim * 4
            scene = np.frombuffer(payload, dtype="<f4", count=frames * sdim, offset=off)
            off += frames * sdim * 4
            styles = np.frombuffer(payload, dtype=np.uint8, count=frames, offset=off)
            off += frames
            transform = np.frombuffer(payload, dtype="<f8", count=4, offset=off)
            samples.append(
                TrainingSample(
                    features=feats.reshape(frames, fdim).copy(),
                    scene=scene.reshape(frames, sdim).copy(),
                    style_ids=styles.copy(),
                    transform=transform.copy(),
                )
            )
    return samples


def pack_samples(samples: list[TrainingSample], codebook: np.ndarray) -> dict:
    """Stack samples into the float32 tensors the trainer consumes."""
    features = np.stack([s.features for s in samples]).astype(np.float32)
    scene = np.stack([s.scene for s in samples]).astype(np.float32)
    text = np.stack(
        [codes_for_ids(s.style_ids, codebook) for s in samples]
    ).astype(np.float32)
    return {"features": features, "scene": scene, "text": text}
