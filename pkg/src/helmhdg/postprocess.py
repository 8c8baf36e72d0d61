"""Element-local postprocessing of an HDG solution.

With the nested orthonormal bases of :mod:`helmhdg.felab`, on every element

* P_{k+1} coefficients ``[0, N1)`` span the postprocessing space,
  and ``[1, N1)`` its zero-mean part;
* P_{k+2} coefficients ``[1, N2)`` span the enriched zero-mean test space;
* the mean constraint (v, 1)_K = (u_h, 1)_K fixes coefficient 0 to u_h's.

All operations are batched over elements and return coefficient arrays in the
degree-(k+1) or degree-(k+2) basis.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import felab
from .hdg import HdgSolution


@dataclass(frozen=True, eq=False)
class PostSolution:
    """Minimum-residual postprocessing of an HDG solution.

    nu : (nel, N1) complex, P_{k+1} coefficients.
    eps : (nel, N2) complex, P_{k+2} coefficients with eps[:, 0] == 0.
    """

    hdg: HdgSolution
    nu: np.ndarray
    eps: np.ndarray


@lru_cache(maxsize=None)
def _load_tensor(k: int) -> np.ndarray:
    """R[a, i, j] = int d_a phi_i psi_j, phi in P_{k+2}, psi in P_k (reference)."""
    rule = felab.triangle_quadrature(2 * (k + 2))
    big = felab.reference_basis(k + 2, rule)
    small = felab.reference_basis(k, rule)
    return np.einsum("q,qia,qj->aij", rule.weights, big.grads, small.values)


def _geometry(mesh, elements):
    _, det, inv_t, _ = felab.element_maps(mesh)
    if elements is None:
        return det, inv_t
    return det[elements], inv_t[elements]


def _select(hdg, elements):
    if elements is None:
        return hdg.q, hdg.u
    return hdg.q[elements], hdg.u[elements]


def stiffness(mesh, k: int, elements=None) -> np.ndarray:
    """P_{k+2} stiffness matrices (grad phi_i, grad phi_j)_K, shape (n, N2, N2)."""
    det, inv_t = _geometry(mesh, elements)
    return felab.physical_stiffness(k + 2, det, inv_t)


def flux_load(mesh, q: np.ndarray, k: int, elements=None) -> np.ndarray:
    """b_i = (q_h, grad phi_i)_K for phi_i in P_{k+2}, shape (n, N2)."""
    det, inv_t = _geometry(mesh, elements)
    R = _load_tensor(k)
    # sum_c sum_a G[c, a] R[a, i, j] q_c[j]
    return det[:, None] * np.einsum("nca,aij,ncj->ni", inv_t, R, q)


def _solve_real(M, rhs):
    """Batched solve of a real matrix against complex right-hand sides."""
    stacked = np.stack([rhs.real, rhs.imag], axis=-1)
    sol = np.linalg.solve(M, stacked)
    return sol[..., 0] + 1j * sol[..., 1]


def stenberg_postprocess(hdg: HdgSolution, elements=None) -> np.ndarray:
    """u~ in P_{k+1}: (grad u~, grad v) = -(q_h, grad v) for zero-mean v, mean of u_h."""
    k = hdg.degree
    n1 = felab.poly_dim(k + 1)
    q, u = _select(hdg, elements)
    S = stiffness(hdg.mesh, k, elements)[:, 1:n1, 1:n1]
    b = flux_load(hdg.mesh, q, k, elements)[:, 1:n1]
    out = np.zeros((len(u), n1), dtype=complex)
    out[:, 0] = u[:, 0]
    out[:, 1:] = _solve_real(S, -b)
    return out


def aux_theta(hdg: HdgSolution, elements=None) -> np.ndarray:
    """theta in P_{k+2}: (grad theta, grad v) = -(q_h, grad v) for zero-mean v in P_{k+2}."""
    k = hdg.degree
    n2 = felab.poly_dim(k + 2)
    q, u = _select(hdg, elements)
    S = stiffness(hdg.mesh, k, elements)[:, 1:, 1:]
    b = flux_load(hdg.mesh, q, k, elements)[:, 1:]
    out = np.zeros((len(u), n2), dtype=complex)
    out[:, 0] = u[:, 0]
    out[:, 1:] = _solve_real(S, -b)
    return out


def saddle_matrix(S: np.ndarray, k: int) -> np.ndarray:
    """Square real matrix of the local minimum-residual system.

    Unknowns: eps (N2 - 1 zero-mean coefficients) then nu (N1 coefficients).
    Rows: enriched test space, zero-mean postprocessing space, mean constraint.
    """
    n1 = felab.poly_dim(k + 1)
    n2 = felab.poly_dim(k + 2)
    ne = n2 - 1
    size = ne + n1
    M = np.zeros((len(S), size, size))
    M[:, :ne, :ne] = S[:, 1:, 1:]
    M[:, :ne, ne:] = S[:, 1:, :n1]
    M[:, ne:ne + n1 - 1, :ne] = S[:, 1:n1, 1:]
    M[:, size - 1, ne] = 1.0
    return M


def minres_postprocess(hdg: HdgSolution, elements=None) -> PostSolution | tuple[np.ndarray, np.ndarray]:
    """Solve the local saddle-point problems for (nu_K, eps_K).

    Returns a :class:`PostSolution` for the whole mesh, or a ``(nu, eps)``
    pair when a subset of elements is requested.
    """
    k = hdg.degree
    n1 = felab.poly_dim(k + 1)
    n2 = felab.poly_dim(k + 2)
    ne = n2 - 1
    q, u = _select(hdg, elements)
    S = stiffness(hdg.mesh, k, elements)
    b = flux_load(hdg.mesh, q, k, elements)
    M = saddle_matrix(S, k)
    rhs = np.zeros((len(u), ne + n1), dtype=complex)
    rhs[:, :ne] = -b[:, 1:]
    rhs[:, -1] = u[:, 0]
    x = _solve_real(M, rhs)
    eps = np.zeros((len(u), n2), dtype=complex)
    eps[:, 1:] = x[:, :ne]
    nu = x[:, ne:]
    if elements is None:
        return PostSolution(hdg, nu, eps)
    return nu, eps


def dual_norm_from_load(S: np.ndarray, b: np.ndarray) -> np.ndarray:
    """sqrt(b^H S^{-1} b) on the zero-mean enriched space, batched.

    ``S`` is the full P_{k+2} stiffness and ``b`` the full load vector; the
    constant mode is dropped here.
    """
    L = np.linalg.cholesky(S[:, 1:, 1:])
    # b^H S^{-1} b = |L^{-1} b|^2
    z = np.linalg.solve(L, b[:, 1:, None].astype(complex))[..., 0]
    return np.linalg.norm(z, axis=1)


def dual_norm(mesh, K: int, p, k: int) -> float:
    """Discrete dual norm sup_{v in Xi_K} (p, grad v)_K / ||grad v||_K.

    ``p`` is a callable ``p(x, y) -> (..., 2)`` vector field; Xi_K is the
    zero-mean subspace of P_{k+2}(K).
    """
    rule = felab.triangle_quadrature(felab.MAX_TRIANGLE_EXACTNESS)
    basis = felab.reference_basis(k + 2, rule)
    fmap = felab.element_map(mesh, K)
    pts = fmap(rule.points)
    pv = np.asarray(p(pts[:, 0], pts[:, 1]))
    grads = basis.grads @ fmap.inv_t.T  # (nq, N2, 2) physical
    b = fmap.det * np.einsum("q,qc,qic->i", rule.weights, pv, grads)
    S = felab.physical_stiffness(k + 2, np.array([fmap.det]), fmap.inv_t[None])
    return float(dual_norm_from_load(S, b[None])[0])


def flux_plus_grad_dual_norm(post: PostSolution, nu=None) -> np.ndarray:
    """||q_h + grad nu||_{Xi_K*} per element, for ``nu`` in P_{k+1} (default: post.nu)."""
    hdg = post.hdg
    k = hdg.degree
    n1 = felab.poly_dim(k + 1)
    nu = post.nu if nu is None else nu
    S = stiffness(hdg.mesh, k)
    b = flux_load(hdg.mesh, hdg.q, k) + np.einsum("nij,nj->ni", S[:, :, :n1], nu)
    return dual_norm_from_load(S, b)


def grad_norm(mesh, coeffs: np.ndarray, degree: int) -> np.ndarray:
    """||grad v||_K for v given by P_degree coefficients, per element."""
    _, det, inv_t, _ = felab.element_maps(mesh)
    S = felab.physical_stiffness(degree, det, inv_t)
    val = np.einsum("ni,nij,nj->n", coeffs.conj(), S, coeffs).real
    return np.sqrt(np.maximum(val, 0.0))


def embed(coeffs: np.ndarray, dim: int) -> np.ndarray:
    """Pad lower-degree coefficients with zeros (bases are nested)."""
    out = np.zeros((len(coeffs), dim), dtype=coeffs.dtype)
    out[:, : coeffs.shape[1]] = coeffs
    return out
