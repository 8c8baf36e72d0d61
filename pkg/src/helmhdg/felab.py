"""Reference-element kernels: quadrature, orthonormal bases, affine maps.

The reference triangle has vertices (0, 0), (1, 0), (0, 1) and area 1/2.
Reference edges are parametrised by s in [-1, 1].

Bases are orthonormal in L2 of the reference triangle and *nested*: the first
``(j+1)(j+2)/2`` functions of the degree-k basis span P_j for every j <= k, and
the first function is the constant.  Consequently every function after the
first has zero mean, so zero-mean subspaces are obtained by dropping index 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

MAX_TRIANGLE_EXACTNESS = 20

# Monomials are taken in coordinates centred at the reference centroid to keep
# the Gram matrix well conditioned.
_CENTROID = Fraction(1, 3)


@dataclass(frozen=True, eq=False)
class QuadRule:
    """Quadrature rule on a reference cell.

    ``points`` has shape (n, 2) on the triangle and (n,) on an edge.
    """

    points: np.ndarray
    weights: np.ndarray
    exactness: int

    @property
    def size(self) -> int:
        return len(self.weights)


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Orthonormal P_k basis tabulated at the points of a rule."""

    degree: int
    rule: QuadRule
    values: np.ndarray  # (nq, dim)
    grads: np.ndarray  # (nq, dim, 2), reference gradients

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def zero_mean(self) -> slice:
        """Index slice of the zero-mean subspace (everything but the constant)."""
        return slice(1, self.dim)


@dataclass(frozen=True)
class AffineMap:
    """x = jacobian @ xi + translation."""

    jacobian: np.ndarray
    translation: np.ndarray
    det: float
    inv_t: np.ndarray

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        return xi @ self.jacobian.T + self.translation


def poly_dim(k: int) -> int:
    return (k + 1) * (k + 2) // 2


def _monomial_exponents(k):
    return [(d - b, b) for d in range(k + 1) for b in range(d + 1)]


@lru_cache(maxsize=None)
def triangle_quadrature(exactness: int) -> QuadRule:
    """Quadrature on the reference triangle exact for polynomials of the given degree.

    Degree 1 is the centroid rule and degree 2 the symmetric three-point
    edge-midpoint rule.  Higher degrees use the collapsed (Duffy) tensor product
    of Gauss-Jacobi and Gauss-Legendre points.
    """
    if exactness < 0 or exactness > MAX_TRIANGLE_EXACTNESS:
        raise ValueError(f"quadrature order unsupported: {exactness}")
    if exactness <= 1:
        return QuadRule(np.array([[1 / 3, 1 / 3]]), np.array([0.5]), 1)
    if exactness == 2:
        pts = np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
        return QuadRule(pts, np.full(3, 1 / 6), 2)
    n = (exactness + 2) // 2
    # a in [-1, 1] with weight (1 - a), b in [-1, 1] plain
    a, wa = roots_jacobi(n, 1.0, 0.0)
    b, wb = leggauss(n)
    x = 0.5 * (1 + a)
    A, B = np.meshgrid(x, b, indexing="ij")
    WA, WB = np.meshgrid(wa, wb, indexing="ij")
    xi = A.ravel()
    eta = (0.5 * (1 - A) * (1 + B)).ravel()
    w = (WA * WB).ravel() / 8.0
    return QuadRule(np.column_stack([xi, eta]), w, exactness)


@lru_cache(maxsize=None)
def edge_quadrature(exactness: int) -> QuadRule:
    """Gauss-Legendre rule on [-1, 1]."""
    n = max(1, -(-(exactness + 1) // 2))
    s, w = leggauss(n)
    return QuadRule(s, w, 2 * n - 1)


def _monomial_moment(a: int, b: int) -> Fraction:
    # integral of x^a y^b over the reference triangle
    return Fraction(factorial(a) * factorial(b), factorial(a + b + 2))


def _shifted_moment(a: int, b: int) -> Fraction:
    """Exact integral of (x - 1/3)^a (y - 1/3)^b over the reference triangle."""
    from math import comb

    total = Fraction(0)
    for i in range(a + 1):
        for j in range(b + 1):
            total += (
                comb(a, i) * comb(b, j) * (-_CENTROID) ** (a - i) * (-_CENTROID) ** (b - j)
                * _monomial_moment(i, j)
            )
    return total


@lru_cache(maxsize=None)
def _orthonormal_coefficients(k: int) -> np.ndarray:
    """Coefficients C with phi_i = sum_j C[i, j] m_j (m_j centred monomials).

    Gram-Schmidt is carried out exactly in rational arithmetic (an LDL^T
    factorisation of the monomial Gram matrix); only the final normalisation
    is done in floating point.
    """
    exps = _monomial_exponents(k)
    n = len(exps)
    G = [[_shifted_moment(ea[0] + eb[0], ea[1] + eb[1]) for eb in exps] for ea in exps]
    # rows of T: orthogonal (unnormalised) polynomials in the monomial basis
    T: list[list[Fraction]] = []
    norms: list[Fraction] = []
    for i in range(n):
        row = [Fraction(0)] * n
        row[i] = Fraction(1)
        for j in range(i):
            # <m_i, t_j> / <t_j, t_j>
            proj = sum((G[i][l] * T[j][l] for l in range(j + 1)), Fraction(0)) / norms[j]
            for l in range(j + 1):
                row[l] -= proj * T[j][l]
        nrm = Fraction(0)
        for l in range(i + 1):
            if row[l] == 0:
                continue
            for m in range(i + 1):
                if row[m] != 0:
                    nrm += row[l] * G[l][m] * row[m]
        T.append(row)
        norms.append(nrm)
    C = np.array([[float(c) for c in row] for row in T])
    return C / np.sqrt(np.array([float(v) for v in norms]))[:, None]


def eval_basis(k: int, points) -> tuple[np.ndarray, np.ndarray]:
    """Values (n, dim) and reference gradients (n, dim, 2) of the P_k basis."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x = pts[:, 0] - 1 / 3
    y = pts[:, 1] - 1 / 3
    exps = _monomial_exponents(k)
    C = _orthonormal_coefficients(k)
    n = len(exps)
    m = np.empty((len(x), n))
    mx = np.zeros((len(x), n))
    my = np.zeros((len(x), n))
    for j, (a, b) in enumerate(exps):
        m[:, j] = x**a * y**b
        if a > 0:
            mx[:, j] = a * x ** (a - 1) * y**b
        if b > 0:
            my[:, j] = b * x**a * y ** (b - 1)
    vals = m @ C.T
    grads = np.stack([mx @ C.T, my @ C.T], axis=-1)
    return vals, grads


@lru_cache(maxsize=None)
def reference_basis(k: int, rule: QuadRule) -> BasisSet:
    if k < 0:
        raise ValueError("polynomial degree must be non-negative")
    vals, grads = eval_basis(k, rule.points)
    vals.flags.writeable = False
    grads.flags.writeable = False
    return BasisSet(k, rule, vals, grads)


def face_basis(k: int, s) -> np.ndarray:
    """Orthonormal Legendre basis of P_k on [-1, 1], shape (n, k+1)."""
    s = np.asarray(s, dtype=float)
    out = np.empty((s.size, k + 1))
    for m in range(k + 1):
        c = np.zeros(m + 1)
        c[m] = 1.0
        out[:, m] = np.polynomial.legendre.legval(s, c) * sqrt((2 * m + 1) / 2)
    return out


# Local edge e is opposite local vertex e and runs from vertex e+1 to e+2.
REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def edge_points(e: int, s) -> np.ndarray:
    """Reference-triangle points of local edge ``e`` at parameters ``s``.

    ``s = -1`` is vertex e+1 and ``s = +1`` vertex e+2.
    """
    s = np.asarray(s, dtype=float)[:, None]
    a = REF_VERTICES[(e + 1) % 3]
    b = REF_VERTICES[(e + 2) % 3]
    return 0.5 * (1 - s) * a + 0.5 * (1 + s) * b


def element_map(mesh, K: int) -> AffineMap:
    v = mesh.vertices[mesh.triangles[K]]
    J = np.column_stack([v[1] - v[0], v[2] - v[0]])
    det = float(np.linalg.det(J))
    if not det > 0:
        raise ValueError(f"degenerate element {K}: determinant {det}")
    return AffineMap(J, v[0].copy(), det, np.linalg.inv(J).T)


def element_maps(mesh):
    """Batched affine data: jacobians (n, 2, 2), determinants (n,), inverse transposes."""
    v = mesh.vertices[mesh.triangles]
    J = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    if np.any(det <= 0):
        bad = int(np.argmin(det))
        raise ValueError(f"degenerate element {bad}: determinant {det[bad]}")
    inv_t = np.empty_like(J)
    inv_t[:, 0, 0] = J[:, 1, 1]
    inv_t[:, 0, 1] = -J[:, 1, 0]
    inv_t[:, 1, 0] = -J[:, 0, 1]
    inv_t[:, 1, 1] = J[:, 0, 0]
    inv_t /= det[:, None, None]
    return J, det, inv_t, v[:, 0]


def physical_points(mesh, rule: QuadRule, elements=None) -> np.ndarray:
    """Quadrature points mapped to each element, shape (n_el, nq, 2)."""
    tri = mesh.triangles if elements is None else mesh.triangles[elements]
    v = mesh.vertices[tri]
    lam1 = rule.points[:, 0]
    lam2 = rule.points[:, 1]
    lam0 = 1 - lam1 - lam2
    return (
        lam0[None, :, None] * v[:, None, 0]
        + lam1[None, :, None] * v[:, None, 1]
        + lam2[None, :, None] * v[:, None, 2]
    )


def mass_matrix(k: int, rule: QuadRule | None = None) -> np.ndarray:
    rule = rule or triangle_quadrature(min(2 * k, MAX_TRIANGLE_EXACTNESS))
    b = reference_basis(k, rule)
    return np.einsum("q,qi,qj->ij", rule.weights, b.values, b.values)


def stiffness_tensors(k: int) -> np.ndarray:
    """Reference tensors R[a, b, i, j] = int d_a phi_i d_b phi_j over the reference triangle."""
    rule = triangle_quadrature(max(2 * k - 2, 1))
    b = reference_basis(k, rule)
    return np.einsum("q,qia,qjb->abij", rule.weights, b.grads, b.grads)


def physical_stiffness(k: int, det, inv_t) -> np.ndarray:
    """Element stiffness matrices (grad phi_i, grad phi_j)_K, shape (n, dim, dim)."""
    R = stiffness_tensors(k)
    metric = np.einsum("nca,ncb->nab", inv_t, inv_t)
    return det[:, None, None] * np.einsum("nab,abij->nij", metric, R)
