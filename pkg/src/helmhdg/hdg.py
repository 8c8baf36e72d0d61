"""HDG discretisation of the Helmholtz problem with an impedance boundary.

Unknowns per element K: the flux q_h (two components in P_k), the scalar
u_h in P_k, and on every face the trace u^_h in P_k(F).  The numerical flux is
q^.n = q_h.n + i tau (u_h - u^_h).

Local equations (test functions v, w):

    (q, v) - (u, div v) + <u^, v.n>                      = 0
    -omega^2 (u, w) - (q, grad w) + <q^.n, w>           = (f, w)

Face equations (test function mu):

    sum_K <q^.n, mu>_F                                   = 0           interior F
    <-q^.n + i omega u^, mu>_F                           = <g, mu>_F   boundary F

The second local equation and the boundary equation are multiplied by -1 in
the assembled system, which makes the element matrix and hence the skeleton
matrix complex symmetric.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import felab
from .mesh import BOUNDARY, Mesh
from .problems import ProblemSpec

LOAD_EXACTNESS = 20
_CHUNK = 20_000


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class HdgConfig:
    """Polynomial degree and stabilisation.

    ``tau="omega"`` sets tau = omega on every face; a positive number sets a
    constant value.
    """

    degree: int = 1
    tau: float | str = "omega"

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 0:
            raise ValueError(f"degree must be a non-negative integer, got {self.degree}")
        if isinstance(self.tau, str):
            if self.tau != "omega":
                raise ValueError(f"tau must be 'omega' or a positive number, got {self.tau!r}")
        elif not float(self.tau) > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    def tau_value(self, omega: float) -> float:
        return float(omega) if self.tau == "omega" else float(self.tau)


@dataclass(frozen=True, eq=False)
class HdgSolution:
    """Coefficients in the orthonormal element/face bases.

    q : (nel, 2, nk) complex, u : (nel, nk) complex, uhat : (nf, k+1) complex.
    """

    mesh: Mesh
    config: HdgConfig
    omega: float
    q: np.ndarray
    u: np.ndarray
    uhat: np.ndarray

    @property
    def degree(self) -> int:
        return self.config.degree


@dataclass(frozen=True, eq=False)
class LocalBlocks:
    """Element blocks of the (sign-symmetrised) HDG system for a set of elements.

    Interior unknowns are ordered (q_x, q_y, u), face unknowns (face 0, 1, 2)
    with k+1 coefficients each.

    A : (n, 3nk, 3nk)   interior-interior block
    B : (n, 3nk, 3m)    interior-face coupling; the face-interior block is B^T
    D : (n, 3m, 3m)     face-face block
    F : (n, 3nk)        interior load
    G : (n, 3m)         face load
    """

    elements: np.ndarray
    degree: int
    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    F: np.ndarray
    G: np.ndarray

    def mass_q(self) -> np.ndarray:
        nk = felab.poly_dim(self.degree)
        return self.A[:, : 2 * nk, : 2 * nk]


@dataclass(frozen=True, eq=False)
class Condensed:
    """Schur complements and the local solution operators used for recovery."""

    elements: np.ndarray
    schur: np.ndarray  # (n, 3m, 3m)
    rhs: np.ndarray  # (n, 3m)
    AinvB: np.ndarray
    AinvF: np.ndarray


@lru_cache(maxsize=None)
def _reference_tables(k: int):
    """Reference integrals needed by the element assembly."""
    nk = felab.poly_dim(k)
    rule = felab.triangle_quadrature(2 * (k + 2))
    basis = felab.reference_basis(k, rule)
    # Qref[a, i, j] = int d_a phi_i phi_j
    Qref = np.einsum("q,qia,qj->aij", rule.weights, basis.grads, basis.values)
    erule = felab.edge_quadrature(2 * (k + 2))
    s, ws = erule.points, erule.weights
    psi = felab.face_basis(k, s)
    psi_flip = felab.face_basis(k, -s)
    E = np.empty((3, nk, nk))
    Bpsi = np.empty((3, 2, nk, k + 1))
    for e in range(3):
        phi, _ = felab.eval_basis(k, felab.edge_points(e, s))
        E[e] = np.einsum("q,qi,qj->ij", ws, phi, phi)
        # local parameter s equals the face parameter unless the edge is flipped
        Bpsi[e, 0] = np.einsum("q,qi,qm->im", ws, phi, psi)
        Bpsi[e, 1] = np.einsum("q,qi,qm->im", ws, phi, psi_flip)
    return Qref, E, Bpsi


def _element_load(mesh, problem, k, elements):
    rule = felab.triangle_quadrature(LOAD_EXACTNESS)
    basis = felab.reference_basis(k, rule)
    _, det, _, _ = felab.element_maps(mesh)
    out = np.empty((len(elements), basis.dim), dtype=complex)
    for start in range(0, len(elements), _CHUNK):
        sel = elements[start:start + _CHUNK]
        pts = felab.physical_points(mesh, rule, sel)
        fv = problem.f(pts[..., 0], pts[..., 1])
        out[start:start + _CHUNK] = det[sel, None] * np.einsum("q,nq,qi->ni", rule.weights, fv, basis.values)
    return out


def _boundary_load(mesh, problem, k):
    """<g, psi_m>_F for every face (zero on interior faces), shape (nf, k+1)."""
    erule = felab.edge_quadrature(LOAD_EXACTNESS)
    psi = felab.face_basis(k, erule.points)
    out = np.zeros((mesh.n_faces, k + 1), dtype=complex)
    bf = mesh.boundary_faces
    if bf.size == 0:
        return out
    a = mesh.vertices[mesh.faces[bf, 0]]
    b = mesh.vertices[mesh.faces[bf, 1]]
    s = erule.points
    pts = 0.5 * (1 - s)[None, :, None] * a[:, None] + 0.5 * (1 + s)[None, :, None] * b[:, None]
    normals = np.broadcast_to(mesh.face_normal[bf][:, None, :], pts.shape)
    gv = problem.g(pts[..., 0], pts[..., 1], normals)
    out[bf] = 0.5 * mesh.face_length[bf, None] * np.einsum("q,nq,qm->nm", erule.weights, gv, psi)
    return out


def assemble_local(mesh: Mesh, problem: ProblemSpec, config: HdgConfig, elements=None) -> LocalBlocks:
    """Element blocks for ``elements`` (default: all elements), batched."""
    k = config.degree
    nk = felab.poly_dim(k)
    m = k + 1
    omega = problem.omega
    tau = config.tau_value(omega)
    elements = np.arange(mesh.n_triangles) if elements is None else np.atleast_1d(np.asarray(elements, dtype=np.int64))
    n = len(elements)
    Qref, E, Bpsi = _reference_tables(k)
    _, det_all, inv_t_all, _ = felab.element_maps(mesh)
    det = det_all[elements]
    inv_t = inv_t_all[elements]

    hF = mesh.face_length[mesh.tri_to_faces[elements]]  # (n, 3)
    normals = mesh.outward_normals()[elements]  # (n, 3, 2)
    flip = mesh.tri_face_flip[elements].astype(int)  # (n, 3)
    on_boundary = mesh.face_kind[mesh.tri_to_faces[elements]] == BOUNDARY

    eye = np.eye(nk)
    A = np.zeros((n, 3 * nk, 3 * nk), dtype=complex)
    A[:, 0:nk, 0:nk] = det[:, None, None] * eye
    A[:, nk:2 * nk, nk:2 * nk] = det[:, None, None] * eye
    # Qc[n, c, i, j] = (phi_j, d_c phi_i)_K
    Qc = det[:, None, None, None] * np.einsum("nca,aij->ncij", inv_t, Qref)
    for c in range(2):
        A[:, c * nk:(c + 1) * nk, 2 * nk:] = -Qc[:, c]
        A[:, 2 * nk:, c * nk:(c + 1) * nk] = -np.swapaxes(Qc[:, c], 1, 2)
    Eb = np.einsum("ne,eij->nij", 0.5 * hF * tau, E)
    A[:, 2 * nk:, 2 * nk:] = omega**2 * det[:, None, None] * eye - 1j * Eb

    B = np.zeros((n, 3 * nk, 3 * m), dtype=complex)
    D = np.zeros((n, 3 * m, 3 * m), dtype=complex)
    for e in range(3):
        Bt = Bpsi[e][flip[:, e]]  # (n, nk, m)
        scale = 0.5 * hF[:, e]
        cols = slice(e * m, (e + 1) * m)
        for c in range(2):
            B[:, c * nk:(c + 1) * nk, cols] = (scale * normals[:, e, c])[:, None, None] * Bt
        # row w was negated: +i tau <u^, w>
        B[:, 2 * nk:, cols] = (1j * tau * scale)[:, None, None] * Bt
        diag = -1j * tau * scale - 1j * omega * scale * on_boundary[:, e]
        D[:, cols, cols] = diag[:, None, None] * np.eye(m)

    F = np.zeros((n, 3 * nk), dtype=complex)
    F[:, 2 * nk:] = -_element_load(mesh, problem, k, elements)
    G = np.zeros((n, 3 * m), dtype=complex)
    gload = _boundary_load(mesh, problem, k)
    faces = mesh.tri_to_faces[elements]
    for e in range(3):
        G[:, e * m:(e + 1) * m] = -gload[faces[:, e]]
    return LocalBlocks(elements, k, A, B, D, F, G)


def condense(blocks: LocalBlocks) -> Condensed:
    """Eliminate (q_h, u_h) element by element."""
    rhs_all = np.concatenate([blocks.B, blocks.F[..., None]], axis=2)
    try:
        sol = np.linalg.solve(blocks.A, rhs_all)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"local elimination failed: {exc}") from None
    if not np.all(np.isfinite(sol)):
        raise SolverError("local elimination failed: non-finite result")
    AinvB = sol[..., :-1]
    AinvF = sol[..., -1]
    Bt = np.swapaxes(blocks.B, 1, 2)
    schur = blocks.D - Bt @ AinvB
    rhs = blocks.G - np.einsum("nij,nj->ni", Bt, AinvF)
    return Condensed(blocks.elements, schur, rhs, AinvB, AinvF)


def face_dofs(mesh: Mesh, k: int, elements=None) -> np.ndarray:
    """Global skeleton dof indices of each element, shape (n, 3(k+1))."""
    m = k + 1
    faces = mesh.tri_to_faces if elements is None else mesh.tri_to_faces[elements]
    return (faces[:, :, None] * m + np.arange(m)).reshape(len(faces), 3 * m)


def assemble_skeleton(mesh: Mesh, condensed: Condensed, k: int):
    """Global sparse matrix and load on the skeleton (sum of element contributions)."""
    m = k + 1
    ndof = mesh.n_faces * m
    dofs = face_dofs(mesh, k, condensed.elements)
    rows = np.repeat(dofs, dofs.shape[1], axis=1).ravel()
    cols = np.tile(dofs, (1, dofs.shape[1])).ravel()
    A = sp.coo_matrix((condensed.schur.ravel(), (rows, cols)), shape=(ndof, ndof)).tocsc()
    b = np.zeros(ndof, dtype=complex)
    np.add.at(b, dofs.ravel(), condensed.rhs.ravel())
    return A, b


def solve_skeleton(A, b) -> np.ndarray:
    """Sparse direct solve of the skeleton system."""
    if not np.any(b):
        return np.zeros_like(b)
    try:
        lu = spla.splu(A.tocsc())
        x = lu.solve(b)
    except RuntimeError as exc:
        raise SolverError(f"skeleton system singular: {exc}") from None
    if not np.all(np.isfinite(x)):
        raise SolverError("skeleton system singular: non-finite solution")
    return x


def recover_interior(mesh: Mesh, condensed: Condensed, uhat: np.ndarray, k: int):
    """Back-substitute (q_h, u_h) from the skeleton solution; returns (q, u)."""
    nk = felab.poly_dim(k)
    lam = uhat.reshape(-1)[face_dofs(mesh, k, condensed.elements)]
    x = condensed.AinvF - np.einsum("nij,nj->ni", condensed.AinvB, lam)
    q = x[:, : 2 * nk].reshape(-1, 2, nk)
    u = x[:, 2 * nk:]
    return q, u


def solve_hdg(mesh: Mesh, problem: ProblemSpec, config: HdgConfig | None = None) -> HdgSolution:
    config = config or HdgConfig()
    k = config.degree
    blocks = assemble_local(mesh, problem, config)
    condensed = condense(blocks)
    A, b = assemble_skeleton(mesh, condensed, k)
    x = solve_skeleton(A, b)
    q, u = recover_interior(mesh, condensed, x, k)
    return HdgSolution(mesh, config, problem.omega, q, u, x.reshape(mesh.n_faces, k + 1))


def hdg_residuals(sol: HdgSolution, problem: ProblemSpec) -> dict[str, float]:
    """Relative residuals of the discrete equations tested with every basis function.

    Keys: ``"flux"`` and ``"scalar"`` for the two element equations, ``"skeleton"``
    for the interior and boundary face equations together.
    """
    mesh = sol.mesh
    k = sol.degree
    nk = felab.poly_dim(k)
    blocks = assemble_local(mesh, problem, sol.config)
    x = np.concatenate([sol.q.reshape(-1, 2 * nk), sol.u], axis=1)
    lam = sol.uhat.reshape(-1)[face_dofs(mesh, k)]
    r_int = np.einsum("nij,nj->ni", blocks.A, x) + np.einsum("nij,nj->ni", blocks.B, lam) - blocks.F
    r_face_loc = np.einsum("nji,nj->ni", blocks.B, x) + np.einsum("nij,nj->ni", blocks.D, lam) - blocks.G
    r_face = np.zeros(mesh.n_faces * (k + 1), dtype=complex)
    np.add.at(r_face, face_dofs(mesh, k).ravel(), r_face_loc.ravel())
    g_face = np.zeros_like(r_face)
    np.add.at(g_face, face_dofs(mesh, k).ravel(), blocks.G.ravel())
    load = max(np.linalg.norm(blocks.F), np.linalg.norm(g_face), 1e-300)
    return {
        "flux": float(np.linalg.norm(r_int[:, : 2 * nk]) / load),
        "scalar": float(np.linalg.norm(r_int[:, 2 * nk:]) / load),
        "skeleton": float(np.linalg.norm(r_face) / load),
    }


def write_solution(sol: HdgSolution, path) -> None:
    """Plain-text dump: header ``HDGSOL k Nel Nfaces`` then one line per element
    (q_x, q_y, u coefficients as ``re im`` pairs) and one line per face."""
    k = sol.degree
    with open(path, "w") as fh:
        fh.write(f"HDGSOL {k} {sol.mesh.n_triangles} {sol.mesh.n_faces}\n")
        for q, u in zip(sol.q, sol.u):
            vals = np.concatenate([q.ravel(), u])
            fh.write(" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in vals) + "\n")
        for row in sol.uhat:
            fh.write(" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row) + "\n")


def read_solution(path, mesh: Mesh, omega: float, config: HdgConfig | None = None) -> HdgSolution:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "HDGSOL":
            raise ValueError(f"{path}: missing HDGSOL header")
        k, nel, nf = (int(t) for t in header[1:])
        if nel != mesh.n_triangles or nf != mesh.n_faces:
            raise ValueError(f"{path}: solution sizes do not match the mesh")
        nk = felab.poly_dim(k)

        def row(width):
            vals = np.array(fh.readline().split(), dtype=float)
            if vals.size != 2 * width:
                raise ValueError(f"{path}: malformed coefficient line")
            return vals[0::2] + 1j * vals[1::2]

        el = np.array([row(3 * nk) for _ in range(nel)])
        uhat = np.array([row(k + 1) for _ in range(nf)])
    config = config or HdgConfig(degree=k)
    if config.degree != k:
        raise ValueError(f"{path}: degree {k} does not match configuration degree {config.degree}")
    return HdgSolution(mesh, config, omega, el[:, : 2 * nk].reshape(-1, 2, nk), el[:, 2 * nk:], uhat)
