"""Conforming triangular meshes and newest-vertex bisection.

Triangles are stored counter-clockwise.  Local edge ``e`` of a triangle is the
edge opposite local vertex ``e``; it runs from vertex ``e+1`` to ``e+2`` (mod 3).
``refinement_edge[t]`` is the local index of the edge bisected next, so the
vertex opposite it is the "newest vertex".

Faces are stored with sorted vertex pairs.  The parameter s in [-1, 1] of a
face runs from ``faces[f, 0]`` to ``faces[f, 1]``; all face unknowns use this
global parametrisation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

INTERIOR = 0
BOUNDARY = 1


class Face(NamedTuple):
    vertices: tuple[int, int]
    length: float
    normal: np.ndarray
    kind: str  # "interior" | "boundary"


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable conforming triangulation with face connectivity.

    Attributes
    ----------
    vertices : (nv, 2) float
    triangles : (nt, 3) int, counter-clockwise
    refinement_edge : (nt,) int, local edge index
    faces : (nf, 2) int, sorted vertex pairs
    face_kind : (nf,) int, 0 interior / 1 boundary
    face_tris : (nf, 2) int, incident triangles (lower index first, -1 if absent)
    face_local : (nf, 2) int, local edge index of the face in each incident triangle
    face_normal : (nf, 2) float, outward normal of ``face_tris[:, 0]``
    face_length : (nf,) float
    tri_to_faces : (nt, 3) int, face of each local edge
    tri_face_sign : (nt, 3) int, +1 where the triangle's outward normal equals
        the stored face normal, -1 otherwise
    tri_face_flip : (nt, 3) bool, True where local edge direction (vertex
        e+1 -> e+2) is opposite to the face parametrisation
    parent : (nt,) int, index of the parent triangle in the mesh this one was
        refined from (-1 for a generated mesh)
    """

    vertices: np.ndarray
    triangles: np.ndarray
    refinement_edge: np.ndarray
    faces: np.ndarray
    face_kind: np.ndarray
    face_tris: np.ndarray
    face_local: np.ndarray
    face_normal: np.ndarray
    face_length: np.ndarray
    tri_to_faces: np.ndarray
    tri_face_sign: np.ndarray
    tri_face_flip: np.ndarray
    parent: np.ndarray

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_kind == INTERIOR)

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_kind == BOUNDARY)

    def face(self, f: int) -> Face:
        kind = "boundary" if self.face_kind[f] == BOUNDARY else "interior"
        a, b = self.faces[f]
        return Face((int(a), int(b)), float(self.face_length[f]), self.face_normal[f].copy(), kind)

    def areas(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        d1 = v[:, 1] - v[:, 0]
        d2 = v[:, 2] - v[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def diameters(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        lengths = np.linalg.norm(v[:, [1, 2, 0]] - v[:, [2, 0, 1]], axis=-1)
        return lengths.max(axis=1)

    def edge_lengths(self) -> np.ndarray:
        """Lengths of local edges, shape (nt, 3)."""
        return self.face_length[self.tri_to_faces]

    def outward_normals(self) -> np.ndarray:
        """Outward unit normals of every local edge, shape (nt, 3, 2)."""
        return self.face_normal[self.tri_to_faces] * self.tri_face_sign[..., None]

    def boundary_length(self) -> float:
        return float(self.face_length[self.boundary_faces].sum())

    def min_angle(self) -> float:
        v = self.vertices[self.triangles]
        angles = []
        for i in range(3):
            a = v[:, (i + 1) % 3] - v[:, i]
            b = v[:, (i + 2) % 3] - v[:, i]
            cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angles.append(np.arccos(np.clip(cos, -1.0, 1.0)))
        return float(np.min(angles))

    def same_as(self, other: "Mesh") -> bool:
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
            and np.array_equal(self.refinement_edge, other.refinement_edge)
        )


def build_mesh(vertices, triangles, refinement_edge=None, parent=None) -> Mesh:
    """Assemble connectivity for a counter-clockwise triangle list.

    If ``refinement_edge`` is omitted the longest edge of each triangle is used
    (first one on ties).
    """
    vertices = np.ascontiguousarray(vertices, dtype=float)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64).reshape(-1, 3)
    nt = len(triangles)
    v = vertices[triangles]
    d1 = v[:, 1] - v[:, 0]
    d2 = v[:, 2] - v[:, 0]
    area2 = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(area2 <= 0):
        raise ValueError("triangles must be non-degenerate and counter-clockwise")

    # local edge e: vertex e+1 -> vertex e+2
    start = triangles[:, [1, 2, 0]]
    end = triangles[:, [2, 0, 1]]
    if refinement_edge is None:
        lengths = np.linalg.norm(vertices[end] - vertices[start], axis=-1)
        refinement_edge = np.argmax(lengths, axis=1)
    refinement_edge = np.asarray(refinement_edge, dtype=np.int64)
    if parent is None:
        parent = np.full(nt, -1, dtype=np.int64)

    lo = np.minimum(start, end).ravel()
    hi = np.maximum(start, end).ravel()
    key = lo * (len(vertices) + 1) + hi
    uniq, first, inverse, counts = np.unique(key, return_index=True, return_inverse=True, return_counts=True)
    if np.any(counts > 2):
        raise ValueError("non-manifold mesh: an edge is shared by more than two triangles")
    nf = len(uniq)
    faces = np.column_stack([lo[first], hi[first]])
    tri_to_faces = inverse.reshape(nt, 3)
    tri_face_flip = (start != faces[tri_to_faces, 0])

    # incident triangles; np.unique is stable so occurrences come in element order
    order = np.argsort(inverse, kind="stable")
    slot = np.zeros(3 * nt, dtype=np.int64)
    sorted_inv = inverse[order]
    is_second = np.zeros(3 * nt, dtype=bool)
    is_second[1:] = sorted_inv[1:] == sorted_inv[:-1]
    slot[order] = is_second.astype(np.int64)
    face_tris = np.full((nf, 2), -1, dtype=np.int64)
    face_local = np.full((nf, 2), -1, dtype=np.int64)
    tri_idx = np.repeat(np.arange(nt), 3)
    loc_idx = np.tile(np.arange(3), nt)
    face_tris[inverse, slot] = tri_idx
    face_local[inverse, slot] = loc_idx
    face_kind = np.where(counts == 1, BOUNDARY, INTERIOR)

    # outward normal of the lower-indexed triangle
    t0 = face_tris[:, 0]
    e0 = face_local[:, 0]
    a = vertices[triangles[t0, (e0 + 1) % 3]]
    b = vertices[triangles[t0, (e0 + 2) % 3]]
    tangent = b - a
    face_length = np.linalg.norm(tangent, axis=1)
    face_normal = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / face_length[:, None]
    tri_face_sign = np.where(face_tris[tri_to_faces, 0] == np.arange(nt)[:, None], 1, -1)

    return Mesh(
        vertices=vertices,
        triangles=triangles,
        refinement_edge=refinement_edge,
        faces=faces,
        face_kind=face_kind,
        face_tris=face_tris,
        face_local=face_local,
        face_normal=face_normal,
        face_length=face_length,
        tri_to_faces=tri_to_faces,
        tri_face_sign=tri_face_sign,
        tri_face_flip=tri_face_flip,
        parent=np.asarray(parent, dtype=np.int64),
    )


def _structured(x0, y0, n_cells_x, n_cells_y, h, keep_cell):
    nx, ny = n_cells_x + 1, n_cells_y + 1
    index = -np.ones((nx, ny), dtype=np.int64)
    cells = [(i, j) for j in range(n_cells_y) for i in range(n_cells_x) if keep_cell(i, j)]
    used = set()
    for i, j in cells:
        used.update([(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)])
    verts = []
    for j in range(ny):
        for i in range(nx):
            if (i, j) in used:
                index[i, j] = len(verts)
                verts.append((x0 + i * h, y0 + j * h))
    tris, ref = [], []
    for i, j in cells:
        v00, v10, v01, v11 = index[i, j], index[i + 1, j], index[i, j + 1], index[i + 1, j + 1]
        # split along the lower-left -> upper-right diagonal; it is the longest edge
        tris.append((v00, v10, v11))
        ref.append(1)
        tris.append((v00, v11, v01))
        ref.append(2)
    return build_mesh(np.array(verts), np.array(tris), np.array(ref))


def generate_unit_square(n: int) -> Mesh:
    """Structured mesh of (0, 1)^2 with 2 n^2 triangles."""
    if n < 1:
        raise ValueError(f"invalid configuration: n must be >= 1, got {n}")
    return _structured(0.0, 0.0, n, n, 1.0 / n, lambda i, j: True)


def generate_l_shape(n: int) -> Mesh:
    """Structured mesh of (-1, 1)^2 minus [0, 1]^2 with 6 n^2 triangles."""
    if n < 1:
        raise ValueError(f"invalid configuration: n must be >= 1, got {n}")
    return _structured(-1.0, -1.0, 2 * n, 2 * n, 1.0 / n, lambda i, j: not (i >= n and j >= n))


def bisect(mesh: Mesh, marked) -> Mesh:
    """Newest-vertex bisection of the marked triangles with conforming closure.

    Every marked triangle is bisected at least once.  Edges to split are closed
    under the rule "a triangle with any split edge also splits its refinement
    edge"; each triangle is then cut into 2, 3 or 4 children, which keeps the
    mesh free of hanging nodes.
    """
    marked = np.unique(np.asarray(list(marked) if not isinstance(marked, np.ndarray) else marked, dtype=np.int64))
    if marked.size == 0:
        return mesh
    if marked.min() < 0 or marked.max() >= mesh.n_triangles:
        raise IndexError("marked triangle index out of range")

    nt = mesh.n_triangles
    rows = np.arange(nt)
    ref_face = mesh.tri_to_faces[rows, mesh.refinement_edge]
    split = np.zeros(mesh.n_faces, dtype=bool)
    split[ref_face[marked]] = True
    while True:
        touched = split[mesh.tri_to_faces].any(axis=1)
        need = touched & ~split[ref_face]
        if not need.any():
            break
        split[ref_face[need]] = True

    split_faces = np.flatnonzero(split)
    mid = np.full(mesh.n_faces, -1, dtype=np.int64)
    mid[split_faces] = mesh.n_vertices + np.arange(len(split_faces))
    new_vertices = np.vstack([
        mesh.vertices,
        0.5 * (mesh.vertices[mesh.faces[split_faces, 0]] + mesh.vertices[mesh.faces[split_faces, 1]]),
    ])

    # rotate so that the refinement edge is opposite local vertex 0: (a, b, c)
    r = mesh.refinement_edge
    a = mesh.triangles[rows, r]
    b = mesh.triangles[rows, (r + 1) % 3]
    c = mesh.triangles[rows, (r + 2) % 3]
    m_bc = mid[ref_face]
    m_ca = mid[mesh.tri_to_faces[rows, (r + 1) % 3]]
    m_ab = mid[mesh.tri_to_faces[rows, (r + 2) % 3]]

    keep = m_bc < 0
    cut = ~keep
    left = cut & (m_ab < 0)  # child (a, b, m) stays whole
    left_split = cut & (m_ab >= 0)
    right = cut & (m_ca < 0)  # child (a, m, c) stays whole
    right_split = cut & (m_ca >= 0)

    pieces = [
        (rows[keep], mesh.triangles[keep], r[keep]),
        (rows[left], np.column_stack([a, b, m_bc])[left], np.full(left.sum(), 2)),
        (rows[left_split], np.column_stack([m_bc, a, m_ab])[left_split], np.full(left_split.sum(), 2)),
        (rows[left_split], np.column_stack([m_bc, m_ab, b])[left_split], np.full(left_split.sum(), 1)),
        (rows[right], np.column_stack([a, m_bc, c])[right], np.full(right.sum(), 1)),
        (rows[right_split], np.column_stack([m_bc, c, m_ca])[right_split], np.full(right_split.sum(), 2)),
        (rows[right_split], np.column_stack([m_bc, m_ca, a])[right_split], np.full(right_split.sum(), 1)),
    ]
    parent = np.concatenate([p[0] for p in pieces])
    order = np.argsort(parent, kind="stable")
    triangles = np.concatenate([p[1] for p in pieces])[order]
    ref = np.concatenate([p[2] for p in pieces])[order]
    return build_mesh(new_vertices, triangles, ref, parent[order])


def refine_uniform(mesh: Mesh, times: int = 2) -> Mesh:
    """Bisect every triangle ``times`` times (twice halves the mesh size)."""
    for _ in range(times):
        mesh = bisect(mesh, np.arange(mesh.n_triangles))
    return mesh


def mesh_stats(mesh: Mesh) -> tuple[int, float, float]:
    """(number of elements, maximum diameter, minimum angle in radians)."""
    return mesh.n_triangles, float(mesh.diameters().max()), mesh.min_angle()


def check_mesh(mesh: Mesh, domain_area: float | None = None) -> None:
    """Raise AssertionError if a structural invariant is violated."""
    assert np.all(mesh.areas() > 0), "non-positive triangle area"
    counts = np.bincount(mesh.tri_to_faces.ravel(), minlength=mesh.n_faces)
    assert np.all(counts[mesh.face_kind == INTERIOR] == 2)
    assert np.all(counts[mesh.face_kind == BOUNDARY] == 1)
    # no hanging nodes: no vertex lies in the interior of any face
    a = mesh.vertices[mesh.faces[:, 0]]
    b = mesh.vertices[mesh.faces[:, 1]]
    _assert_no_vertex_on_faces(mesh.vertices, a, b)
    assert np.allclose(np.linalg.norm(mesh.face_normal, axis=1), 1.0, atol=1e-14)
    assert np.allclose(mesh.face_length, np.linalg.norm(b - a, axis=1), rtol=0, atol=1e-15)
    if domain_area is not None:
        assert abs(mesh.areas().sum() - domain_area) <= 1e-12 * domain_area


def _assert_no_vertex_on_faces(vertices, a, b):
    # A hanging node is the midpoint of some face in a conforming-bisection
    # mesh; check midpoints and quarter points against the vertex set.
    lookup = {tuple(np.round(p, 13)) for p in vertices}
    for t in (0.5, 0.25, 0.75):
        pts = np.round(a + t * (b - a), 13)
        for p in pts:
            assert tuple(p) not in lookup, f"hanging node at {p}"


def write_mesh(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{mesh.n_vertices} {mesh.n_triangles} {mesh.n_faces}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for (v0, v1, v2), r in zip(mesh.triangles, mesh.refinement_edge):
            fh.write(f"{v0} {v1} {v2} {r}\n")
        for (v0, v1), kind in zip(mesh.faces, mesh.face_kind):
            fh.write(f"{v0} {v1} {kind}\n")


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        tokens = [line.split() for line in fh if line.strip()]
    try:
        nv, nt, nf = (int(t) for t in tokens[0])
        verts = np.array([[float(t) for t in row] for row in tokens[1:1 + nv]])
        tri_rows = np.array([[int(t) for t in row] for row in tokens[1 + nv:1 + nv + nt]], dtype=np.int64)
        face_rows = np.array([[int(t) for t in row] for row in tokens[1 + nv + nt:1 + nv + nt + nf]], dtype=np.int64)
    except (ValueError, IndexError) as exc:
        raise ValueError(f"malformed mesh file {path}: {exc}") from None
    if verts.shape != (nv, 2) or tri_rows.shape != (nt, 4) or face_rows.shape != (nf, 3):
        raise ValueError(f"malformed mesh file {path}: section sizes do not match header")
    mesh = build_mesh(verts, tri_rows[:, :3], tri_rows[:, 3])
    if not (np.array_equal(np.sort(face_rows[:, :2], axis=1), mesh.faces)
            and np.array_equal(face_rows[:, 2], mesh.face_kind)):
        raise ValueError(f"malformed mesh file {path}: face list inconsistent with triangles")
    return mesh
