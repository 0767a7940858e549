"""Watertight triangle meshes from heightfields, plus OBJ export.

The solid consists of the top surface (two triangles per cell), skirt
walls down to a flat base below the minimum height, and a base cap that
fans across the boundary ring. Every edge is shared by exactly two
triangles with opposite traversal direction.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMesh
from .heightfield import HeightField


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) meters
    faces: np.ndarray     # (F, 3) int indices, outward-wound

    def validate(self) -> None:
        if len(self.faces) == 0:
            raise EmptyMesh("mesh has no faces")


def heightfield_to_mesh(field: HeightField, base_margin: float = 1.0) -> TriangleMesh:
    """Closed solid under the height surface; watertight by construction."""
    r, c = field.rows, field.cols
    cell = field.cell_size
    ox, oz = field.origin
    base_y = float(field.heights.min()) - base_margin

    xs = ox + np.arange(c) * cell
    zs = oz + np.arange(r) * cell
    x, z = np.meshgrid(xs, zs)
    top = np.stack([x, field.heights, z], axis=-1).reshape(-1, 3)

    def tid(rr, cc):
        return rr * c + cc

    faces = []
    # top surface: wound so flat-field normals point +Y
    for rr in range(r - 1):
        for cc in range(c - 1):
            v00 = tid(rr, cc)
            v01 = tid(rr, cc + 1)
            v10 = tid(rr + 1, cc)
            v11 = tid(rr + 1, cc + 1)
            faces.append((v00, v10, v11))
            faces.append((v00, v11, v01))

    # boundary ring, counter-clockwise seen from above (+Y)
    ring = (
        [tid(0, cc) for cc in range(c - 1)]
        + [tid(rr, c - 1) for rr in range(r - 1)]
        + [tid(r - 1, cc) for cc in range(c - 1, 0, -1)]
        + [tid(rr, 0) for rr in range(r - 1, 0, -1)]
    )

    verts = [top]
    bottom_start = len(top)
    bottom = top[ring].copy()
    bottom[:, 1] = base_y
    verts.append(bottom)
    nring = len(ring)

    # skirt walls: quad per ring edge, wound outward
    for k in range(nring):
        k2 = (k + 1) % nring
        t0, t1 = ring[k], ring[k2]
        b0, b1 = bottom_start + k, bottom_start + k2
        faces.append((t0, t1, b1))
        faces.append((t0, b1, b0))

    # base cap: fan over the ring polygon, facing -Y
    for k in range(1, nring - 1):
        faces.append((bottom_start, bottom_start + k, bottom_start + k + 1))

    return TriangleMesh(
        vertices=np.concatenate(verts, axis=0),
        faces=np.array(faces, dtype=np.int64),
    )


def face_normals(mesh: TriangleMesh) -> np.ndarray:
    v = mesh.vertices
    f = mesh.faces
    n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    lens = np.linalg.norm(n, axis=1, keepdims=True)
    lens[lens == 0] = 1.0
    return n / lens


def watertight_report(mesh: TriangleMesh) -> dict:
    """Edge-manifold audit: every edge must appear in exactly two faces,
    traversed once in each direction (consistent outward orientation)."""
    directed = {}
    for a, b, c in mesh.faces:
        for e in ((a, b), (b, c), (c, a)):
            directed[e] = directed.get(e, 0) + 1
    bad_duplicate = [e for e, k in directed.items() if k != 1]
    bad_unpaired = [e for e in directed if (e[1], e[0]) not in directed]
    return {
        "watertight": not bad_duplicate and not bad_unpaired,
        "duplicate_directed_edges": len(bad_duplicate),
        "unpaired_edges": len(bad_unpaired),
        "edge_count": len(directed) // 2,
        "face_count": len(mesh.faces),
        "vertex_count": len(mesh.vertices),
    }


def save_obj(path, mesh: TriangleMesh) -> None:
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
