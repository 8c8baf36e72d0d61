"""A posteriori estimator built on the residual representative, and exact error norms.

For every element K

    eta_K^2 = ||grad eps_K||_K^2 + ||q_h + grad nu_h||_K^2
              + 1/2 sum_{F interior, F in dK} omega^2 h_F ||[nu_h]||_F^2

and eta = (sum eta_K^2)^{1/2}.  Errors are measured in

    |||(w, v)|||^2 = ||w||_{1,omega,T_h}^2 + ||v||^2,
    ||w||_{1,omega,K}^2 = omega^2 ||w||_K^2 + ||grad w||_K^2 + 1/2 sum omega^2 h_F ||[w]||_F^2.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import felab
from .mesh import Mesh
from .postprocess import PostSolution, grad_norm
from .problems import ProblemSpec

ERROR_EXACTNESS = felab.MAX_TRIANGLE_EXACTNESS
_CHUNK = 20_000


@dataclass(frozen=True, eq=False)
class EstimateField:
    """Per-element estimator and its three squared components."""

    eta_K: np.ndarray
    residual_sq: np.ndarray  # ||grad eps_K||^2
    flux_sq: np.ndarray  # ||q_h + grad nu_h||^2
    jump_sq: np.ndarray  # 1/2 sum omega^2 h_F ||[nu_h]||^2

    @property
    def eta(self) -> float:
        return global_estimator(self)


@dataclass(frozen=True)
class ErrorReport:
    err_u_uh: float
    err_u_nu: float
    err_grad_u_nu: float
    jump_u_nu: float
    err_1omega_u_nu: float
    err_q_qh: float
    triple_norm: float
    effectivity: float
    # per-element squared quantities, useful for local efficiency checks
    local_1omega_sq: np.ndarray
    local_q_sq: np.ndarray
    local_grad_sq: np.ndarray


@lru_cache(maxsize=None)
def _trace_tables(degree: int, exactness: int):
    """Volume basis at edge quadrature points: tab[e, flip] has shape (nq, dim).

    Points follow the *face* parametrisation; ``flip`` selects the reversed
    local direction.
    """
    rule = felab.edge_quadrature(exactness)
    dim = felab.poly_dim(degree)
    tab = np.empty((3, 2, rule.size, dim))
    for e in range(3):
        tab[e, 0] = felab.eval_basis(degree, felab.edge_points(e, rule.points))[0]
        tab[e, 1] = felab.eval_basis(degree, felab.edge_points(e, -rule.points))[0]
    return rule, tab


def face_jumps_sq(mesh: Mesh, coeffs: np.ndarray, degree: int, omega: float) -> np.ndarray:
    """omega^2 h_F ||[v]||_F^2 for every face (zero on boundary faces)."""
    rule, tab = _trace_tables(degree, 2 * degree + 2)
    out = np.zeros(mesh.n_faces)
    fi = mesh.interior_faces
    if fi.size == 0:
        return out
    t0, t1 = mesh.face_tris[fi, 0], mesh.face_tris[fi, 1]
    e0, e1 = mesh.face_local[fi, 0], mesh.face_local[fi, 1]
    f0 = mesh.tri_face_flip[t0, e0].astype(int)
    f1 = mesh.tri_face_flip[t1, e1].astype(int)
    v0 = np.einsum("nqi,ni->nq", tab[e0, f0], coeffs[t0])
    v1 = np.einsum("nqi,ni->nq", tab[e1, f1], coeffs[t1])
    h = mesh.face_length[fi]
    norm_sq = 0.5 * h * np.einsum("q,nq->n", rule.weights, np.abs(v0 - v1) ** 2)
    out[fi] = omega**2 * h * norm_sq
    return out


def element_jump_share(mesh: Mesh, face_values: np.ndarray) -> np.ndarray:
    """1/2 sum over the element's interior faces of a per-face quantity."""
    return 0.5 * face_values[mesh.tri_to_faces].sum(axis=1)


def flux_residual_sq(post: PostSolution) -> np.ndarray:
    """||q_h + grad nu_h||_K^2 per element."""
    hdg = post.hdg
    k = hdg.degree
    rule = felab.triangle_quadrature(2 * k + 2)
    small = felab.reference_basis(k, rule)
    big = felab.reference_basis(k + 1, rule)
    _, det, inv_t, _ = felab.element_maps(hdg.mesh)
    qv = np.einsum("qj,ncj->nqc", small.values, hdg.q)
    gref = np.einsum("qia,ni->nqa", big.grads, post.nu)
    gv = np.einsum("nca,nqa->nqc", inv_t, gref)
    return det * np.einsum("q,nq->n", rule.weights, np.sum(np.abs(qv + gv) ** 2, axis=-1))


def element_estimator(post: PostSolution, elements=None) -> EstimateField:
    """Local estimators eta_K for all elements (or the selected ones)."""
    hdg = post.hdg
    mesh = hdg.mesh
    k = hdg.degree
    res = grad_norm(mesh, post.eps, k + 2) ** 2
    flux = flux_residual_sq(post)
    jumps = element_jump_share(mesh, face_jumps_sq(mesh, post.nu, k + 1, hdg.omega))
    eta_K = np.sqrt(res + flux + jumps)
    field = EstimateField(eta_K, res, flux, jumps)
    if elements is None:
        return field
    sel = np.atleast_1d(elements)
    return EstimateField(eta_K[sel], res[sel], flux[sel], jumps[sel])


def global_estimator(field: EstimateField | np.ndarray) -> float:
    etas = field.eta_K if isinstance(field, EstimateField) else np.asarray(field, dtype=float)
    return float(np.sqrt(np.sum(etas**2)))


def _l2_errors(mesh: Mesh, problem: ProblemSpec, post: PostSolution):
    """Per-element squared errors ||u-u_h||, ||u-nu||, ||grad(u-nu)||, ||q-q_h||."""
    hdg = post.hdg
    k = hdg.degree
    rule = felab.triangle_quadrature(ERROR_EXACTNESS)
    small = felab.reference_basis(k, rule)
    big = felab.reference_basis(k + 1, rule)
    _, det, inv_t, _ = felab.element_maps(mesh)
    n = mesh.n_triangles
    out = np.empty((4, n))
    w = rule.weights
    for start in range(0, n, _CHUNK):
        sel = np.arange(start, min(n, start + _CHUNK))
        pts = felab.physical_points(mesh, rule, sel)
        x, y = pts[..., 0], pts[..., 1]
        u = problem.u(x, y)
        du = problem.grad(x, y)
        uh = hdg.u[sel] @ small.values.T
        nu = post.nu[sel] @ big.values.T
        gref = np.einsum("qia,ni->nqa", big.grads, post.nu[sel])
        gnu = np.einsum("nca,nqa->nqc", inv_t[sel], gref)
        qh = np.einsum("qj,ncj->nqc", small.values, hdg.q[sel])
        d = det[sel]
        out[0, sel] = d * (np.abs(u - uh) ** 2 @ w)
        out[1, sel] = d * (np.abs(u - nu) ** 2 @ w)
        out[2, sel] = d * (np.sum(np.abs(du - gnu) ** 2, axis=-1) @ w)
        # q = -grad u
        out[3, sel] = d * (np.sum(np.abs(du + qh) ** 2, axis=-1) @ w)
    return out


def error_norms(mesh: Mesh, problem: ProblemSpec, post: PostSolution, eta: float | None = None) -> ErrorReport:
    """Errors of the HDG and postprocessed solutions against the exact solution.

    The jump of u - nu_h equals minus the jump of nu_h because u is continuous.
    """
    if not problem.has_exact or problem.u is None:
        raise ValueError("no exact solution")
    omega = problem.omega
    e_uh, e_nu, e_grad, e_q = _l2_errors(mesh, problem, post)
    k = post.hdg.degree
    jumps = element_jump_share(mesh, face_jumps_sq(mesh, post.nu, k + 1, omega))
    local_1omega = omega**2 * e_nu + e_grad + jumps
    one_omega = float(np.sqrt(local_1omega.sum()))
    err_q = float(np.sqrt(e_q.sum()))
    triple = float(np.sqrt(one_omega**2 + err_q**2))
    if eta is None:
        eta = element_estimator(post).eta
    return ErrorReport(
        err_u_uh=float(np.sqrt(e_uh.sum())),
        err_u_nu=float(np.sqrt(e_nu.sum())),
        err_grad_u_nu=float(np.sqrt(e_grad.sum())),
        jump_u_nu=float(np.sqrt(jumps.sum())),
        err_1omega_u_nu=one_omega,
        err_q_qh=err_q,
        triple_norm=triple,
        effectivity=float(eta / triple) if triple > 0 else float("nan"),
        local_1omega_sq=local_1omega,
        local_q_sq=e_q,
        local_grad_sq=e_grad,
    )
