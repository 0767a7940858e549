"""Procedural locomotion clips: scripted gait oscillators over terrain.

Each clip walks a straight or arced path across a heightfield. Footsteps
are planned from the gait phase (cadence, duty cycle, left/right offset),
planted feet sit exactly on the terrain, swing feet follow the surface
with guaranteed clearance, and a two-bone IK turns the plan into joint
rotations. Contact labels come from the phase windows, so planted feet
never slide.

Paths are confined to ~1.5 m around the start (arcs for faster gaits) so
that every foot of a 2-second clip stays inside a 4x4 m fitting patch
centered on the first root position.
"""

import math
from dataclasses import dataclass

import numpy as np

from .heightfield import HeightField, height_at
from .motion import MotionSegment
from .rotations import matrix_to_sixd, yaw_matrix
from .skeleton import (
    JOINT_COUNT,
    LOWER_LEG,
    UPPER_LEG,
    Skeleton,
    default_skeleton,
)
from .styles import STYLES, StyleDef

CLIP_FRAMES = 60
CLIP_FPS = 30.0

MAX_PATH_REACH = 1.5        # meters from the start point
STANCE_WIDTH = 0.18         # lateral distance between planted feet
SWING_LIFT = 0.07           # peak extra clearance mid-swing
MAX_LEG = UPPER_LEG + LOWER_LEG - 0.006
MIN_LEG = abs(UPPER_LEG - LOWER_LEG) + 0.09

_TOE_REST = np.array([0.0, -0.02, 0.15])  # ankle->toe offset at rest


@dataclass(frozen=True)
class ClipRecord:
    segment: MotionSegment
    style_name: str
    style_id: int
    is_jump: bool
    seed: int


def _arc_path(start, heading, speed, curvature, times):
    """Exact constant-speed arc: positions (T, 2) and headings (T,)."""
    s = speed * times
    psi = heading + curvature * s
    if abs(curvature) < 1e-9:
        x = start[0] + np.sin(heading) * s
        z = start[1] + np.cos(heading) * s
    else:
        x = start[0] + (np.cos(heading) - np.cos(psi)) / curvature
        z = start[1] + (np.sin(psi) - np.sin(heading)) / curvature
    return np.stack([x, z], axis=1), psi


def _minimal_rotation(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Smallest rotation mapping unit vector src onto unit vector dst."""
    v = np.cross(src, dst)
    c = float(np.dot(src, dst))
    s2 = float(np.dot(v, v))
    if s2 < 1e-16:
        if c > 0:
            return np.eye(3)
        # antiparallel: rotate about any perpendicular axis
        perp = np.array([1.0, 0.0, 0.0]) if abs(src[0]) < 0.9 else np.array([0.0, 0.0, 1.0])
        axis = np.cross(src, perp)
        axis /= np.linalg.norm(axis)
        k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
        return np.eye(3) + 2.0 * (k @ k)
    k = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + k + k @ k * ((1 - c) / s2)


def _x_pitch(beta: float) -> np.ndarray:
    c, s = math.cos(beta), math.sin(beta)
    return np.array([[1.0, 0, 0], [0, c, -s], [0, s, c]])


def _two_bone_ik(hip, target, pole_dir):
    """Knee position for a hip->knee->ankle chain bending toward pole_dir."""
    delta = target - hip
    d = float(np.linalg.norm(delta))
    d = min(max(d, MIN_LEG), MAX_LEG)
    u = delta / np.linalg.norm(delta)
    target = hip + u * d
    cos_a = (UPPER_LEG**2 + d**2 - LOWER_LEG**2) / (2 * UPPER_LEG * d)
    alpha = math.acos(min(max(cos_a, -1.0), 1.0))
    axis = np.cross(u, pole_dir)
    norm = np.linalg.norm(axis)
    if norm < 1e-9:
        perp = np.array([1.0, 0, 0]) if abs(u[0]) < 0.9 else np.array([0, 0, 1.0])
        axis = np.cross(u, perp)
        norm = np.linalg.norm(axis)
    axis = axis / norm
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    rot = np.eye(3) + math.sin(alpha) * k + (1 - math.cos(alpha)) * (k @ k)
    knee = hip + UPPER_LEG * (rot @ u)
    return knee, target


def _solve_toe_pitch(field, ankle, foot_yaw):
    """Foot pitch placing the toe on the terrain; (beta, converged)."""
    ry = yaw_matrix(foot_yaw)
    beta = 0.0
    lever = float(np.linalg.norm(_TOE_REST))
    phi = math.atan2(-_TOE_REST[1], _TOE_REST[2])
    for _ in range(30):
        toe = ankle + ry @ (_x_pitch(beta) @ _TOE_REST)
        h = height_at(field, toe[0], toe[2])
        if abs(toe[1] - h) < 1e-10:
            return beta, True
        want = h - ankle[1]  # desired toe height relative to the ankle
        ratio = -want / lever
        if abs(ratio) > 1.0:
            return beta, False
        beta = math.asin(ratio) - phi
    return beta, False


def _toe_clearance_pitch(field, ankle, foot_yaw, radius, beta):
    """Lift the foot pitch until the toe clears the terrain.

    Returns (beta, deficit); a positive deficit means even the fully
    lifted toe still penetrates and the ankle must rise by that much.
    """
    ry = yaw_matrix(foot_yaw)
    while True:
        toe = ankle + ry @ (_x_pitch(beta) @ _TOE_REST)
        h = height_at(field, toe[0], toe[2])
        deficit = (h + radius + 0.005) - toe[1]
        if deficit <= 0:
            return beta, 0.0
        if beta <= -1.25:
            return beta, deficit
        beta = max(beta - 0.25, -1.25)


class _FootPlan:
    """Phase-derived stance windows and planted positions for one foot."""

    def __init__(self, field, path_fn, style: StyleDef, speed, side, phase_offset):
        self.field = field
        self.path_fn = path_fn
        self.style = style
        self.speed = speed
        self.side = side  # +1 left, -1 right
        self.offset = phase_offset
        self.cycle = 1.0 / style.cadence
        self.cache = {}

    def stance_index(self, t):
        return math.floor(t / self.cycle - self.offset)

    def in_stance(self, t):
        if self.style.duty >= 1.0 or self.speed == 0.0:
            return True
        frac = t / self.cycle - self.offset - self.stance_index(t)
        return frac < self.style.duty

    def footstep(self, k):
        """Planted (xz, heading, height) for stance k."""
        if k in self.cache:
            return self.cache[k]
        t_mid = (k + self.style.duty / 2) * self.cycle + self.offset * self.cycle
        if self.speed == 0.0:
            t_mid = 0.0
        xz, psi = self.path_fn(t_mid)
        lateral = np.array([math.cos(psi), -math.sin(psi)]) * (self.side * STANCE_WIDTH / 2)
        pos = xz + lateral
        h = float(height_at(self.field, pos[0], pos[1]))
        self.cache[k] = (pos, float(psi), h)
        return self.cache[k]

    def ankle_target(self, t, radius):
        """(ankle xyz, foot yaw, in_contact, swing_frac) at time t."""
        if self.style.duty >= 1.0 or self.speed == 0.0:
            pos, psi, h = self.footstep(0)
            return np.array([pos[0], h, pos[1]]), psi, True, 0.0
        k = self.stance_index(t)
        frac = t / self.cycle - self.offset - k
        if frac < self.style.duty:
            pos, psi, h = self.footstep(k)
            return np.array([pos[0], h, pos[1]]), psi, True, 0.0
        # swing from footstep k toward k+1
        s = (frac - self.style.duty) / (1.0 - self.style.duty)
        p0, psi0, h0 = self.footstep(k)
        p1, psi1, h1 = self.footstep(k + 1)
        blend = 3 * s**2 - 2 * s**3
        xz = p0 + (p1 - p0) * blend
        h = float(height_at(self.field, xz[0], xz[1]))
        clearance = radius + 0.004 + SWING_LIFT * math.sin(math.pi * min(max(s, 0.04), 0.96))
        psi = psi0 + (psi1 - psi0) * blend
        return np.array([xz[0], h + clearance, xz[1]]), psi, False, s


def generate_clip(
    seed: int,
    style_name: str,
    field: HeightField,
    start_xz: tuple[float, float],
    start_heading: float,
    n_frames: int = CLIP_FRAMES,
    fps: float = CLIP_FPS,
    skeleton: Skeleton | None = None,
) -> ClipRecord:
    """One deterministic locomotion clip of a given style over a field."""
    sk = skeleton or default_skeleton()
    style = STYLES[style_name]
    rng = np.random.default_rng(seed)

    speed = float(rng.uniform(*style.speed))
    duration = n_frames / fps
    cycle_t = 1.0 / style.cadence
    # footsteps extrapolate ~one cycle past the clip; straight paths are only
    # safe when even that extended reach stays inside the patch radius
    if speed * (duration + cycle_t) <= MAX_PATH_REACH * 0.93:
        curvature = float(rng.uniform(-0.5, 0.5)) if rng.random() < 0.6 else 0.0
    else:
        radius = float(rng.uniform(0.45, MAX_PATH_REACH / 2.0))
        curvature = float(rng.choice([-1.0, 1.0])) / radius

    times = np.arange(n_frames) / fps

    def path_fn(t):
        xz, psi = _arc_path(start_xz, start_heading, speed, curvature, np.array([t]))
        return xz[0], float(psi[0])

    path_xz, path_psi = _arc_path(start_xz, start_heading, speed, curvature, times)

    phase_offsets = (0.0, 0.0) if style.is_jump or speed == 0.0 else (0.0, 0.5)
    feet_plans = [
        _FootPlan(field, path_fn, style, speed, +1, phase_offsets[0]),  # left
        _FootPlan(field, path_fn, style, speed, -1, phase_offsets[1]),  # right
    ]

    # smoothed terrain track under the root path
    ground = height_at(field, path_xz[:, 0], path_xz[:, 1])
    win = 8
    smooth = np.array([
        ground[max(0, i - win): i + win + 1].mean() for i in range(n_frames)
    ])

    cycle = 1.0 / style.cadence
    root_y = smooth + style.root_height + style.bob * np.sin(4 * math.pi * times / cycle)
    if style.is_jump:
        # flight pulse while both feet swing
        for i, t in enumerate(times):
            if not feet_plans[0].in_stance(t):
                k = feet_plans[0].stance_index(t)
                frac = t / cycle - k
                s = (frac - style.duty) / (1.0 - style.duty)
                root_y[i] += style.jump_height * math.sin(math.pi * min(max(s, 0.0), 1.0))

    # keep every planted foot reachable: drop the root where a stance ankle
    # would otherwise pull out of leg range (steep slopes, stair risers)
    for i, t in enumerate(times):
        psi = float(path_psi[i])
        r_root = yaw_matrix(psi) @ _x_pitch(style.lean)
        for leg, hj in enumerate((1, 2)):
            plan = feet_plans[leg]
            ankle, _, in_contact, _ = plan.ankle_target(t, sk.foot_radius)
            if not in_contact:
                continue
            hip_off = r_root @ sk.offsets[hj]
            hip_xz = path_xz[i] + hip_off[[0, 2]]
            horiz_sq = float(np.sum((hip_xz - ankle[[0, 2]]) ** 2))
            vert_reach_sq = (MAX_LEG - 0.003) ** 2 - horiz_sq
            if vert_reach_sq <= 0.01:
                continue  # hopeless frame; the IK clamp will absorb it
            max_root = ankle[1] + math.sqrt(vert_reach_sq) - hip_off[1]
            root_y[i] = min(root_y[i], max_root)

    rotations = np.zeros((n_frames, JOINT_COUNT, 6))
    roots = np.zeros((n_frames, 3))
    contacts = np.zeros((n_frames, 4), dtype=np.int64)

    arm_phase = (0.0, math.pi)
    down = np.array([0.0, -1.0, 0.0])
    ankle_rest_dir = sk.offsets[7] / np.linalg.norm(sk.offsets[7])

    for i, t in enumerate(times):
        psi = float(path_psi[i])
        r_root = yaw_matrix(psi) @ _x_pitch(style.lean)
        root = np.array([path_xz[i, 0], root_y[i], path_xz[i, 1]])

        frame_rot = [np.eye(3) for _ in range(JOINT_COUNT)]
        frame_rot[0] = r_root

        for leg, (hj, kj, aj) in enumerate([(1, 4, 7), (2, 5, 8)]):
            plan = feet_plans[leg]
            ankle, foot_yaw, in_contact, swing_s = plan.ankle_target(t, sk.foot_radius)

            hip = root + r_root @ sk.offsets[hj]
            pole = np.array([math.sin(psi), 0.0, math.cos(psi)])
            knee, ankle = _two_bone_ik(hip, ankle, pole)

            # toe pitch: planted feet try to touch down, swing feet stay clear
            toe_contact = False
            if in_contact:
                beta, toe_contact = _solve_toe_pitch(field, ankle, foot_yaw)
            if not toe_contact:
                if in_contact:
                    beta = -0.15
                else:
                    beta = -(0.13 + 0.45 * math.sin(math.pi * swing_s))
                beta, deficit = _toe_clearance_pitch(
                    field, ankle, foot_yaw, sk.foot_radius, beta
                )
                if deficit > 0:
                    ankle = ankle + np.array([0.0, deficit, 0.0])
                    knee, ankle = _two_bone_ik(hip, ankle, pole)

            g_hip = _minimal_rotation(down, (knee - hip) / np.linalg.norm(knee - hip))
            g_knee = _minimal_rotation(
                ankle_rest_dir, (ankle - knee) / np.linalg.norm(ankle - knee)
            )
            g_ankle = yaw_matrix(foot_yaw) @ _x_pitch(beta)

            frame_rot[hj] = r_root.T @ g_hip
            frame_rot[kj] = g_hip.T @ g_knee
            frame_rot[aj] = g_knee.T @ g_ankle

            contacts[i, leg] = 1 if in_contact else 0          # heel channel
            contacts[i, 2 + leg] = 1 if (in_contact and toe_contact) else 0

        # torso and arms
        spine_pitch = style.lean * 0.3
        for sj in (3, 6, 9):
            frame_rot[sj] = _x_pitch(spine_pitch)
        for arm, (sh, el) in enumerate([(16, 18), (17, 19)]):
            swing = style.arm_swing * math.sin(2 * math.pi * t / cycle + arm_phase[arm])
            sign = -1.0 if arm == 0 else 1.0
            frame_rot[sh] = yaw_matrix(sign * (style.arms_forward + swing))
            frame_rot[el] = yaw_matrix(sign * 0.25)

        roots[i] = root
        rotations[i] = matrix_to_sixd(np.stack(frame_rot), tol=np.inf)

    segment = MotionSegment(rotations=rotations, root=roots, contacts=contacts, fps=fps)
    return ClipRecord(
        segment=segment,
        style_name=style_name,
        style_id=style.style_id,
        is_jump=style.is_jump,
        seed=seed,
    )
