"""Regular-grid heightfields: bilinear sampling, patches, binary format.

Grid layout: heights[r, c] sits at world (origin_x + c*cell, origin_z + r*cell),
so columns run along +X and rows along +Z. All scene queries are vertical
projections onto this surface; overhangs cannot be represented.

Binary format HGT1 (little-endian): magic b"HGT1", u32 rows, u32 cols,
f32 cell_size, f64 origin_x, f64 origin_z, rows*cols f32 heights row-major.
"""

import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import OutOfBounds

PATCH_EXTENT = 4.0  # meters, edge length of fitting patches


@dataclass(frozen=True)
class HeightField:
    heights: np.ndarray          # (rows, cols) meters
    cell_size: float             # meters per cell
    origin: tuple[float, float]  # world (x, z) of heights[0, 0]

    @property
    def rows(self) -> int:
        return self.heights.shape[0]

    @property
    def cols(self) -> int:
        return self.heights.shape[1]

    @property
    def extent(self) -> tuple[float, float]:
        """(x_extent, z_extent) in meters."""
        return ((self.cols - 1) * self.cell_size, (self.rows - 1) * self.cell_size)

    def validate(self) -> None:
        if self.rows < 2 or self.cols < 2:
            raise ValueError("heightfield needs at least 2x2 nodes")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if not np.all(np.isfinite(self.heights)):
            raise ValueError("heights must be finite")


def height_at(field: HeightField, x, z) -> np.ndarray:
    """Bilinear height at world (x, z); arrays broadcast elementwise.

    Raises OutOfBounds if any query lies outside the field extent
    (the boundary itself is inside).
    """
    fx = (np.asarray(x, dtype=np.float64) - field.origin[0]) / field.cell_size
    fz = (np.asarray(z, dtype=np.float64) - field.origin[1]) / field.cell_size
    eps = 1e-9
    if np.any(fx < -eps) or np.any(fx > field.cols - 1 + eps) or \
       np.any(fz < -eps) or np.any(fz > field.rows - 1 + eps):
        raise OutOfBounds("height query outside field extent")
    c0 = np.clip(np.floor(fx).astype(np.int64), 0, field.cols - 2)
    r0 = np.clip(np.floor(fz).astype(np.int64), 0, field.rows - 2)
    tx = fx - c0
    tz = fz - r0
    h = field.heights
    h00 = h[r0, c0]
    h01 = h[r0, c0 + 1]
    h10 = h[r0 + 1, c0]
    h11 = h[r0 + 1, c0 + 1]
    top = h00 * (1 - tx) + h01 * tx
    bot = h10 * (1 - tx) + h11 * tx
    return top * (1 - tz) + bot * tz


def height_gradient(field: HeightField, x, z) -> tuple[np.ndarray, np.ndarray]:
    """(dh/dx, dh/dz) of the bilinear surface at world (x, z)."""
    fx = (np.asarray(x, dtype=np.float64) - field.origin[0]) / field.cell_size
    fz = (np.asarray(z, dtype=np.float64) - field.origin[1]) / field.cell_size
    eps = 1e-9
    if np.any(fx < -eps) or np.any(fx > field.cols - 1 + eps) or \
       np.any(fz < -eps) or np.any(fz > field.rows - 1 + eps):
        raise OutOfBounds("height query outside field extent")
    c0 = np.clip(np.floor(fx).astype(np.int64), 0, field.cols - 2)
    r0 = np.clip(np.floor(fz).astype(np.int64), 0, field.rows - 2)
    tx = fx - c0
    tz = fz - r0
    h = field.heights
    h00 = h[r0, c0]
    h01 = h[r0, c0 + 1]
    h10 = h[r0 + 1, c0]
    h11 = h[r0 + 1, c0 + 1]
    dhdx = ((h01 - h00) * (1 - tz) + (h11 - h10) * tz) / field.cell_size
    dhdz = ((h10 - h00) * (1 - tx) + (h11 - h01) * tx) / field.cell_size
    return dhdx, dhdz


def contains(field: HeightField, x, z) -> bool:
    fx = (np.asarray(x, dtype=np.float64) - field.origin[0]) / field.cell_size
    fz = (np.asarray(z, dtype=np.float64) - field.origin[1]) / field.cell_size
    eps = 1e-9
    return bool(
        np.all(fx >= -eps) and np.all(fx <= field.cols - 1 + eps)
        and np.all(fz >= -eps) and np.all(fz <= field.rows - 1 + eps)
    )


def translate(field: HeightField, dx: float, dz: float) -> HeightField:
    """Same surface expressed with a shifted origin."""
    return replace(field, origin=(field.origin[0] + dx, field.origin[1] + dz))


def raise_by(field: HeightField, dy: float) -> HeightField:
    return replace(field, heights=field.heights + dy)


def extend_edges(field: HeightField, pad_meters: float) -> HeightField:
    """Enlarge the field by replicating border heights outward.

    Callers that sample near the boundary (e.g. scene-embedding grids around
    a root close to a patch edge) use this to supply sufficient terrain
    explicitly; sampling itself never clamps.
    """
    pad = int(np.ceil(pad_meters / field.cell_size))
    heights = np.pad(field.heights, pad, mode="edge")
    origin = (
        field.origin[0] - pad * field.cell_size,
        field.origin[1] - pad * field.cell_size,
    )
    return HeightField(heights=heights, cell_size=field.cell_size, origin=origin)


def mirror_x(field: HeightField) -> HeightField:
    """Reflect the surface across the x=0 plane (pairs with pose mirroring)."""
    heights = field.heights[:, ::-1].copy()
    x_max = field.origin[0] + (field.cols - 1) * field.cell_size
    return HeightField(heights=heights, cell_size=field.cell_size, origin=(-x_max, field.origin[1]))


@dataclass(frozen=True)
class TerrainPatch:
    """A 4x4 m fitting patch in patch-local coordinates.

    The local frame puts the patch center at (0, 0): origin = (-2, -2).
    Heights are re-zeroed so the center height is 0 at sampling time.
    """

    field: HeightField
    source_id: str
    yaw: float = 0.0

    def validate(self) -> None:
        self.field.validate()
        ex, ez = self.field.extent
        cell = self.field.cell_size
        if abs(ex - PATCH_EXTENT) > cell or abs(ez - PATCH_EXTENT) > cell:
            raise ValueError("patch extent must be 4x4 m within one cell")


def sample_patch(field: HeightField, center: tuple[float, float], yaw: float,
                 cell_size: float = 0.05, source_id: str = "") -> TerrainPatch:
    """Resample a 4x4 m patch at `center` rotated by `yaw`, center-zeroed.

    Raises OutOfBounds when the rotated footprint leaves the source field.
    """
    n = int(round(PATCH_EXTENT / cell_size)) + 1
    axis = np.linspace(-PATCH_EXTENT / 2, PATCH_EXTENT / 2, n)
    u, v = np.meshgrid(axis, axis)  # u along local x (cols), v along local z (rows)
    cy, sy = np.cos(yaw), np.sin(yaw)
    # local (u, v) -> world, rotating about +Y by yaw
    wx = center[0] + cy * u + sy * v
    wz = center[1] - sy * u + cy * v
    heights = height_at(field, wx, wz)
    center_h = height_at(field, center[0], center[1])
    patch_field = HeightField(
        heights=heights - center_h,
        cell_size=cell_size,
        origin=(-PATCH_EXTENT / 2, -PATCH_EXTENT / 2),
    )
    return TerrainPatch(field=patch_field, source_id=source_id, yaw=yaw)


def save_hgt(path, field: HeightField) -> None:
    with open(path, "wb") as fh:
        fh.write(b"HGT1")
        fh.write(struct.pack("<IIfdd", field.rows, field.cols, field.cell_size,
                             field.origin[0], field.origin[1]))
        fh.write(field.heights.astype("<f4").tobytes())


def load_hgt(path) -> HeightField:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != b"HGT1":
            raise ValueError("not an HGT1 heightfield file")
        rows, cols, cell_size, ox, oz = struct.unpack("<IIfdd", fh.read(28))
        data = np.frombuffer(fh.read(rows * cols * 4), dtype="<f4")
    heights = data.reshape(rows, cols).astype(np.float64)
    return HeightField(heights=heights, cell_size=float(cell_size), origin=(ox, oz))
