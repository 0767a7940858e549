"""Motion segments: per-frame 6D joint rotations, root path, contact labels.

Also the versioned textual motion file format:

    {"version": 1, "fps": ..., "joint_parents": [...],
     "joint_offsets": [[x,y,z], ...],
     "frames": [{"rotations": [[6 floats] x 22],
                 "root": [x, y, z],
                 "contacts": [4 ints]}, ...]}
"""

import json
from dataclasses import dataclass, replace

import numpy as np

from .rotations import sixd_to_matrix, matrix_to_sixd, identity_sixd
from .skeleton import Skeleton, JOINT_COUNT, MIRROR_PERM, CONTACT_MIRROR_PERM

MOTION_FORMAT_VERSION = 1

# Per-frame flat feature layout used by the diffusion stack:
# 22*6 rotation values, 3 root coords, 4 contact labels.
FEATURE_DIM = JOINT_COUNT * 6 + 3 + 4


@dataclass(frozen=True)
class MotionSegment:
    """N frames of pose data. Arrays are treated as immutable after creation.

    rotations: (N, 22, 6) parent-relative 6D rotations (root entry is global)
    root:      (N, 3) world root positions, meters
    contacts:  (N, 4) binary labels ordered [l_heel, r_heel, l_toe, r_toe]
    """

    rotations: np.ndarray
    root: np.ndarray
    contacts: np.ndarray
    fps: float = 30.0

    @property
    def frame_count(self) -> int:
        return self.rotations.shape[0]

    def validate(self) -> None:
        n = self.frame_count
        if self.rotations.shape != (n, JOINT_COUNT, 6):
            raise ValueError("rotations must be (N, 22, 6)")
        if self.root.shape != (n, 3):
            raise ValueError("root must be (N, 3)")
        if self.contacts.shape != (n, 4):
            raise ValueError("contacts must be (N, 4)")
        if not np.all(np.isfinite(self.root)):
            raise ValueError("root positions must be finite")
        if not np.all(np.isin(self.contacts, (0, 1))):
            raise ValueError("contacts must be exactly 0/1")
        sixd_to_matrix(self.rotations)  # raises DegenerateRotation if invalid

    def window(self, start: int, length: int) -> "MotionSegment":
        s = slice(start, start + length)
        return replace(
            self,
            rotations=self.rotations[s].copy(),
            root=self.root[s].copy(),
            contacts=self.contacts[s].copy(),
        )


def rest_segment(n: int, root: np.ndarray = (0.0, 0.89, 0.0), fps: float = 30.0) -> MotionSegment:
    """N identical rest-pose frames standing at `root`."""
    rotations = identity_sixd((n, JOINT_COUNT))
    roots = np.tile(np.asarray(root, dtype=np.float64), (n, 1))
    contacts = np.ones((n, 4), dtype=np.int64)
    return MotionSegment(rotations=rotations, root=roots, contacts=contacts, fps=fps)


def features_from_segment(segment: MotionSegment) -> np.ndarray:
    """Flatten a segment to (N, FEATURE_DIM) floats."""
    n = segment.frame_count
    return np.concatenate(
        [
            segment.rotations.reshape(n, -1),
            segment.root,
            segment.contacts.astype(np.float64),
        ],
        axis=1,
    )


def segment_from_features(
    features: np.ndarray,
    fps: float = 30.0,
    reorthonormalize: bool = True,
    contact_threshold: float = 0.5,
) -> MotionSegment:
    """Inverse of features_from_segment; snaps rotations and contacts.

    Raw feature vectors (e.g. denoiser output) carry approximate rotations
    and soft contacts; decoding re-orthonormalizes the 6D blocks and
    thresholds contacts at `contact_threshold`.
    """
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    rot = features[:, : JOINT_COUNT * 6].reshape(n, JOINT_COUNT, 6)
    root = features[:, JOINT_COUNT * 6 : JOINT_COUNT * 6 + 3]
    contacts = (features[:, JOINT_COUNT * 6 + 3 :] > contact_threshold).astype(np.int64)
    if reorthonormalize:
        rot = matrix_to_sixd(sixd_to_matrix(rot), tol=np.inf)
    return MotionSegment(rotations=rot, root=root.copy(), contacts=contacts, fps=fps)


def mirror_segment(segment: MotionSegment) -> MotionSegment:
    """Reflect a motion across the x=0 plane.

    Root x is negated, every joint rotation R becomes M R M with
    M = diag(-1, 1, 1), and left/right joint and contact channels swap.
    Mirroring twice returns the original motion.
    """
    mats = sixd_to_matrix(segment.rotations)
    mats = mats[:, MIRROR_PERM]
    # M R M: flips the sign of row 0 and column 0 (their intersection twice)
    mats = mats.copy()
    mats[..., 0, 1:] *= -1.0
    mats[..., 1:, 0] *= -1.0
    rotations = matrix_to_sixd(mats)

    root = segment.root.copy()
    root[:, 0] *= -1.0
    contacts = segment.contacts[:, CONTACT_MIRROR_PERM].copy()
    return replace(segment, rotations=rotations, root=root, contacts=contacts)


def save_motion(path, segment: MotionSegment, skeleton: Skeleton) -> None:
    doc = {
        "version": MOTION_FORMAT_VERSION,
        "fps": segment.fps,
        "joint_parents": [int(p) for p in skeleton.parents],
        "joint_offsets": [[float(v) for v in row] for row in skeleton.offsets],
        "frames": [
            {
                "rotations": [[float(v) for v in joint] for joint in segment.rotations[i]],
                "root": [float(v) for v in segment.root[i]],
                "contacts": [int(v) for v in segment.contacts[i]],
            }
            for i in range(segment.frame_count)
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_motion(path) -> MotionSegment:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != MOTION_FORMAT_VERSION:
        raise ValueError(f"unsupported motion format version: {doc.get('version')}")
    frames = doc["frames"]
    rotations = np.array([f["rotations"] for f in frames], dtype=np.float64)
    root = np.array([f["root"] for f in frames], dtype=np.float64)
    contacts = np.array([f["contacts"] for f in frames], dtype=np.int64)
    return MotionSegment(rotations=rotations, root=root, contacts=contacts, fps=float(doc["fps"]))
