"""Object geometry encodings for interaction conditioning.

Two pieces, both consumed as flat condition vectors by downstream models:

* Basis point set (BPS): 512 fixed points on a unit sphere around the
  normalized object center; the encoding stores each point's unsigned
  distance to the object surface.
* Joint-to-voxel distances: the object is voxelized into an 8x8x8 grid
  over its bounding box; occupied voxel centers get their distance to the
  hand midpoint and to the hip, unoccupied entries stay exactly 0.

512 BPS + 512 hand + 512 hip values fill 1536 of the 2048-wide feature;
the last 512 entries are reserved and zero.

A trilinear signed-distance grid lives here too; collision guidance
queries it with body points.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMesh, OutOfBounds
from .terrain_mesh import TriangleMesh

BPS_POINT_COUNT = 512
BPS_RADIUS = 1.0
BPS_SEED = 170_831  # fixed once per build; changing it invalidates encodings
VOXEL_GRID = 8
OBJECT_FEATURE_DIM = 2048


def bps_points() -> np.ndarray:
    """The fixed (512, 3) basis point set on the unit sphere."""
    rng = np.random.default_rng(BPS_SEED)
    v = rng.normal(size=(BPS_POINT_COUNT, 3))
    return BPS_RADIUS * v / np.linalg.norm(v, axis=1, keepdims=True)


def point_triangle_distances(points: np.ndarray, mesh: TriangleMesh) -> np.ndarray:
    """Unsigned distance from each point (Q, 3) to the mesh surface."""
    mesh.validate()
    a = mesh.vertices[mesh.faces[:, 0]]
    b = mesh.vertices[mesh.faces[:, 1]]
    c = mesh.vertices[mesh.faces[:, 2]]
    out = np.empty(len(points))
    for i, p in enumerate(points):
        out[i] = np.sqrt(_sq_dist_point_triangles(p, a, b, c).min())
    return out


def _sq_dist_point_triangles(p, a, b, c):
    """Squared distances from one point to many triangles (Ericson regions)."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    eps = 1e-300
    t_ab = d1 / np.where(np.abs(d1 - d3) < eps, eps, d1 - d3)
    t_ac = d2 / np.where(np.abs(d2 - d6) < eps, eps, d2 - d6)
    den_bc = (d4 - d3) + (d5 - d6)
    t_bc = (d4 - d3) / np.where(np.abs(den_bc) < eps, eps, den_bc)
    denom = va + vb + vc
    denom = np.where(np.abs(denom) < eps, eps, denom)
    v_in = vb / denom
    w_in = vc / denom

    closest = a + ab * v_in[:, None] + ac * w_in[:, None]  # interior default
    m_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    closest = np.where(m_bc[:, None], b + (c - b) * t_bc[:, None], closest)
    m_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    closest = np.where(m_ac[:, None], a + ac * t_ac[:, None], closest)
    m_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    closest = np.where(m_ab[:, None], a + ab * t_ab[:, None], closest)
    m_c = (d6 >= 0) & (d5 <= d6)
    closest = np.where(m_c[:, None], c, closest)
    m_b = (d3 >= 0) & (d4 <= d3)
    closest = np.where(m_b[:, None], b, closest)
    m_a = (d1 <= 0) & (d2 <= 0)
    closest = np.where(m_a[:, None], a, closest)

    diff = p - closest
    return np.einsum("ij,ij->i", diff, diff)


def _surface_samples(mesh: TriangleMesh, spacing: float) -> np.ndarray:
    """Points spread over every triangle at roughly `spacing` resolution."""
    a = mesh.vertices[mesh.faces[:, 0]]
    b = mesh.vertices[mesh.faces[:, 1]]
    c = mesh.vertices[mesh.faces[:, 2]]
    chunks = [a, b, c]
    edge = np.maximum(
        np.linalg.norm(b - a, axis=1),
        np.maximum(np.linalg.norm(c - a, axis=1), np.linalg.norm(c - b, axis=1)),
    )
    for tri in range(len(a)):
        k = min(int(np.ceil(edge[tri] / spacing)), 48)
        if k < 2:
            continue
        us, vs = np.meshgrid(np.linspace(0, 1, k + 1), np.linspace(0, 1, k + 1))
        keep = us + vs <= 1.0 + 1e-12
        u = us[keep][:, None]
        v = vs[keep][:, None]
        chunks.append(a[tri] + u * (b[tri] - a[tri]) + v * (c[tri] - a[tri]))
    return np.concatenate(chunks, axis=0)


def voxelize_surface(mesh: TriangleMesh, grid: int = VOXEL_GRID):
    """(occupancy (g,g,g) bool, centers (g,g,g,3)) over the mesh bounding box."""
    mesh.validate()
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    cell = span / grid
    samples = _surface_samples(mesh, spacing=float(cell.min()) * 0.45)
    idx = np.clip(((samples - lo) / cell).astype(np.int64), 0, grid - 1)
    occupancy = np.zeros((grid, grid, grid), dtype=bool)
    occupancy[idx[:, 0], idx[:, 1], idx[:, 2]] = True
    axes = [lo[d] + (np.arange(grid) + 0.5) * cell[d] for d in range(3)]
    cx, cy, cz = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([cx, cy, cz], axis=-1)
    return occupancy, centers


@dataclass(frozen=True)
class ObjectEncoding:
    bps_dist: np.ndarray    # (512,)
    hand_dist: np.ndarray   # (512,) flattened voxel distances, 0 if unoccupied
    hip_dist: np.ndarray    # (512,)

    @property
    def features(self) -> np.ndarray:
        """(2048,) condition vector; trailing 512 entries reserved as zeros."""
        return np.concatenate(
            [self.bps_dist, self.hand_dist, self.hip_dist,
             np.zeros(OBJECT_FEATURE_DIM - 3 * BPS_POINT_COUNT)]
        )


def joint_voxel_distances(occupancy: np.ndarray, centers: np.ndarray,
                          point: np.ndarray) -> np.ndarray:
    """Flattened (512,) distances from `point` to occupied voxel centers."""
    d = np.linalg.norm(centers - np.asarray(point, dtype=np.float64), axis=-1)
    return np.where(occupancy, d, 0.0).reshape(-1)


def bps_object_encoding(mesh: TriangleMesh, hands: np.ndarray, hip: np.ndarray) -> ObjectEncoding:
    """Full object encoding from a mesh and the two hand + hip positions.

    The mesh is re-centered on its bounding-box center before the BPS
    distances are measured, which makes them translation invariant. Voxel
    distances use the hand midpoint (one 512 block) and the hip (another).
    """
    mesh.validate()
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    center = (lo + hi) / 2.0
    centered = TriangleMesh(vertices=mesh.vertices - center, faces=mesh.faces)

    bps = point_triangle_distances(bps_points(), centered)

    occupancy, centers = voxelize_surface(mesh)
    hands = np.asarray(hands, dtype=np.float64).reshape(2, 3)
    hand_mid = hands.mean(axis=0)
    return ObjectEncoding(
        bps_dist=bps,
        hand_dist=joint_voxel_distances(occupancy, centers, hand_mid),
        hip_dist=joint_voxel_distances(occupancy, centers, np.asarray(hip, dtype=np.float64)),
    )


def uv_sphere_mesh(radius: float = 1.0, center=(0.0, 0.0, 0.0),
                   n_lat: int = 24, n_lon: int = 32) -> TriangleMesh:
    """Tessellated sphere used by demos and encoding tests."""
    center = np.asarray(center, dtype=np.float64)
    verts = [center + [0, radius, 0]]
    for i in range(1, n_lat):
        theta = np.pi * i / n_lat
        for j in range(n_lon):
            phi = 2 * np.pi * j / n_lon
            verts.append(center + radius * np.array([
                np.sin(theta) * np.cos(phi), np.cos(theta), np.sin(theta) * np.sin(phi)
            ]))
    verts.append(center + [0, -radius, 0])
    top, bottom = 0, len(verts) - 1

    def ring(i, j):
        return 1 + (i - 1) * n_lon + (j % n_lon)

    faces = []
    for j in range(n_lon):
        faces.append((top, ring(1, j + 1), ring(1, j)))
        faces.append((bottom, ring(n_lat - 1, j), ring(n_lat - 1, j + 1)))
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            faces.append((ring(i, j), ring(i, j + 1), ring(i + 1, j + 1)))
            faces.append((ring(i, j), ring(i + 1, j + 1), ring(i + 1, j)))
    return TriangleMesh(vertices=np.array(verts), faces=np.array(faces, dtype=np.int64))


@dataclass(frozen=True)
class SdfGrid:
    """Trilinear signed-distance grid: values[i, j, k] at
    origin + (i, j, k) * cell along (x, y, z)."""

    values: np.ndarray
    cell: float
    origin: np.ndarray

    def sample(self, points: np.ndarray) -> np.ndarray:
        f, i0, t = self._locate(points)
        v = self.values
        out = np.zeros(len(points))
        c = [(i, j, k) for i in (0, 1) for j in (0, 1) for k in (0, 1)]
        for di, dj, dk in c:
            w = (
                (t[:, 0] if di else 1 - t[:, 0])
                * (t[:, 1] if dj else 1 - t[:, 1])
                * (t[:, 2] if dk else 1 - t[:, 2])
            )
            out += w * v[i0[:, 0] + di, i0[:, 1] + dj, i0[:, 2] + dk]
        return out

    def gradient(self, points: np.ndarray) -> np.ndarray:
        """Analytic gradient of the trilinear interpolant, (Q, 3)."""
        f, i0, t = self._locate(points)
        v = self.values
        tx, ty, tz = t[:, 0], t[:, 1], t[:, 2]
        g = np.zeros((len(points), 3))
        for di in (0, 1):
            for dj in (0, 1):
                for dk in (0, 1):
                    val = v[i0[:, 0] + di, i0[:, 1] + dj, i0[:, 2] + dk]
                    wx = tx if di else 1 - tx
                    wy = ty if dj else 1 - ty
                    wz = tz if dk else 1 - tz
                    sx = 1.0 if di else -1.0
                    sy = 1.0 if dj else -1.0
                    sz = 1.0 if dk else -1.0
                    g[:, 0] += sx * wy * wz * val
                    g[:, 1] += wx * sy * wz * val
                    g[:, 2] += wx * wy * sz * val
        return g / self.cell

    def _locate(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        f = (points - self.origin) / self.cell
        shape = np.array(self.values.shape)
        eps = 1e-9
        if np.any(f < -eps) or np.any(f > shape - 1 + eps):
            raise OutOfBounds("SDF query outside grid")
        i0 = np.clip(np.floor(f).astype(np.int64), 0, shape - 2)
        t = f - i0
        return f, i0, t


def sphere_sdf_grid(radius: float, center=(0.0, 0.0, 0.0), half_extent: float = 1.5,
                    n: int = 33) -> SdfGrid:
    """Analytic sphere SDF sampled onto a grid (negative inside)."""
    center = np.asarray(center, dtype=np.float64)
    axis = np.linspace(-half_extent, half_extent, n)
    cell = axis[1] - axis[0]
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    d = np.sqrt(gx**2 + gy**2 + gz**2) - radius
    return SdfGrid(values=d, cell=float(cell), origin=center + np.array([axis[0]] * 3))
