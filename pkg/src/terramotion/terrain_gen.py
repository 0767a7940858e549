"""Procedural terrain generation and patch banks.

Substitutes a heightmap library: deterministic fields of four kinds
(flat, slope, stairs, fractal value noise) from which 4x4 m patches are
sampled at random positions and orientations.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams
from .heightfield import HeightField, TerrainPatch, sample_patch, PATCH_EXTENT

TERRAIN_KINDS = ("flat", "slope", "stairs", "fractal")

MAX_SLOPE_DEG = 45.0
MAX_STAIR_RISE = 0.25


def _value_noise(rng: np.random.Generator, rows: int, cols: int,
                 octaves: int, base_cells: int, amplitude: float) -> np.ndarray:
    """Sum of smoothed value-noise octaves, cosine-interpolated."""
    out = np.zeros((rows, cols))
    amp = amplitude
    cells = base_cells
    for _ in range(octaves):
        lat = rng.uniform(-1.0, 1.0, size=(cells + 2, cells + 2))
        # sample the coarse lattice at grid resolution with cosine easing
        gr = np.linspace(0, cells - 1e-9, rows)
        gc = np.linspace(0, cells - 1e-9, cols)
        r0 = np.floor(gr).astype(int)
        c0 = np.floor(gc).astype(int)
        tr = 0.5 - 0.5 * np.cos(np.pi * (gr - r0))
        tc = 0.5 - 0.5 * np.cos(np.pi * (gc - c0))
        tr2 = tr[:, None]
        tc2 = tc[None, :]
        r0 = r0[:, None]
        c0 = c0[None, :]
        layer = (
            lat[r0, c0] * (1 - tr2) * (1 - tc2)
            + lat[r0, c0 + 1] * (1 - tr2) * tc2
            + lat[r0 + 1, c0] * tr2 * (1 - tc2)
            + lat[r0 + 1, c0 + 1] * tr2 * tc2
        )
        out += amp * layer
        amp *= 0.5
        cells *= 2
    return out


def generate_terrain(seed: int, kind: str, size: float = 8.0,
                     cell_size: float = 0.05, **params) -> HeightField:
    """Deterministic heightfield of the given kind.

    kinds and their params:
      flat:    height (default 0)
      slope:   angle_deg (<= 45), direction (radians, downhill->uphill heading)
      stairs:  rise (<= 0.25 m), run (m), direction (radians)
      fractal: amplitude (m), octaves (3..5), base_cells (coarse lattice size)
    """
    if kind not in TERRAIN_KINDS:
        raise InvalidParams(f"unknown terrain kind: {kind}")
    n = int(round(size / cell_size)) + 1
    rng = np.random.default_rng(seed)
    xs = np.arange(n) * cell_size
    zs = np.arange(n) * cell_size
    x, z = np.meshgrid(xs, zs)  # x varies along cols, z along rows

    if kind == "flat":
        heights = np.full((n, n), float(params.get("height", 0.0)))
    elif kind == "slope":
        angle = float(params.get("angle_deg", 10.0))
        if not 0.0 <= angle <= MAX_SLOPE_DEG:
            raise InvalidParams("slope angle_deg must be in [0, 45]")
        direction = float(params.get("direction", 0.0))
        along = x * math.sin(direction) + z * math.cos(direction)
        heights = np.tan(math.radians(angle)) * along
    elif kind == "stairs":
        rise = float(params.get("rise", 0.17))
        run = float(params.get("run", 0.30))
        if not 0.0 < rise <= MAX_STAIR_RISE:
            raise InvalidParams("stair rise must be in (0, 0.25]")
        if run <= 0:
            raise InvalidParams("stair run must be positive")
        direction = float(params.get("direction", 0.0))
        along = x * math.sin(direction) + z * math.cos(direction)
        heights = rise * np.floor(along / run)
    else:  # fractal
        amplitude = float(params.get("amplitude", 0.25))
        octaves = int(params.get("octaves", 4))
        if not 3 <= octaves <= 5:
            raise InvalidParams("fractal octaves must be in [3, 5]")
        base_cells = int(params.get("base_cells", 4))
        heights = _value_noise(rng, n, n, octaves, base_cells, amplitude)

    heights = heights - heights[n // 2, n // 2]
    return HeightField(heights=heights, cell_size=cell_size, origin=(0.0, 0.0))


@dataclass(frozen=True)
class PatchBankParams:
    count: int = 400
    cell_size: float = 0.05
    source_size: float = 8.0
    kind_weights: tuple = (  # (kind, weight)
        ("flat", 0.1), ("slope", 0.25), ("stairs", 0.25), ("fractal", 0.4),
    )


def generate_patch_bank(seed: int, params: PatchBankParams) -> list[TerrainPatch]:
    """Deterministic bank of center-zeroed 4x4 m patches."""
    rng = np.random.default_rng(seed)
    kinds = [k for k, _ in params.kind_weights]
    weights = np.array([w for _, w in params.kind_weights], dtype=np.float64)
    weights /= weights.sum()

    patches: list[TerrainPatch] = []
    n_sources = max(8, params.count // 8)
    sources = []
    for i in range(n_sources):
        kind = kinds[rng.choice(len(kinds), p=weights)]
        sseed = int(rng.integers(0, 2**31 - 1))
        kw = {}
        if kind == "slope":
            kw = {"angle_deg": float(rng.uniform(3.0, 25.0)),
                  "direction": float(rng.uniform(0, 2 * np.pi))}
        elif kind == "stairs":
            kw = {"rise": float(rng.uniform(0.10, 0.22)),
                  "run": float(rng.uniform(0.26, 0.40)),
                  "direction": float(rng.uniform(0, 2 * np.pi))}
        elif kind == "fractal":
            kw = {"amplitude": float(rng.uniform(0.08, 0.35)),
                  "octaves": int(rng.integers(3, 6)),
                  "base_cells": int(rng.integers(3, 7))}
        sources.append((kind, generate_terrain(sseed, kind, size=params.source_size,
                                               cell_size=params.cell_size, **kw)))

    # keep the rotated 4x4 footprint inside the source: safe radius from center
    half = params.source_size / 2.0
    margin = PATCH_EXTENT / math.sqrt(2.0) + 2 * params.cell_size
    for i in range(params.count):
        kind, field = sources[i % n_sources]
        cx = half + rng.uniform(-(half - margin), half - margin)
        cz = half + rng.uniform(-(half - margin), half - margin)
        yaw = rng.uniform(0, 2 * np.pi)
        patch = sample_patch(field, (cx, cz), yaw,
                             cell_size=params.cell_size,
                             source_id=f"{kind}_{i:05d}")
        patches.append(patch)
    return patches
