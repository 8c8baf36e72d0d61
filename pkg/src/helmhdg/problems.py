"""Manufactured Helmholtz problems with closed-form solutions.

Convention: q = -grad u, div q - omega^2 u = f in the domain and
-q.n + i omega u = g on the boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi

SERIES_LIMIT = 8.0
ASYMPTOTIC_LIMIT = 25.0
_MAX_TERMS = 60


class SingularPointError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    """Wavenumber plus evaluators for the exact solution and the data.

    All evaluators are vectorised over arrays ``x``, ``y`` of equal shape.
    ``grad`` returns an array with a trailing axis of length 2 and ``g``
    additionally takes the outward unit normal (same trailing layout).
    """

    name: str
    omega: float
    u: Callable | None
    grad: Callable | None
    f: Callable
    g: Callable
    has_exact: bool = True

    def q(self, x, y):
        return -self.grad(x, y)


def _check_omega(omega):
    omega = float(omega)
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    return omega


def _zero(x, y):
    return np.zeros(np.broadcast(x, y).shape, dtype=complex)


def impedance_data(omega, u, grad):
    """g = -q.n + i omega u with q = -grad u."""

    def g(x, y, n):
        n = np.asarray(n, dtype=float)
        du = grad(x, y)
        return du[..., 0] * n[..., 0] + du[..., 1] * n[..., 1] + 1j * omega * u(x, y)

    return g


def plane_wave(omega, angle=np.pi / 8) -> ProblemSpec:
    """u = exp(i omega (x cos a + y sin a)); solves the homogeneous equation."""
    omega = _check_omega(omega)
    d = np.array([np.cos(angle), np.sin(angle)])

    def u(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        return np.exp(1j * omega * (x * d[0] + y * d[1]))

    def grad(x, y):
        val = u(x, y)
        return np.stack([1j * omega * d[0] * val, 1j * omega * d[1] * val], axis=-1)

    return ProblemSpec("plane_wave", omega, u, grad, _zero, impedance_data(omega, u, grad))


def zero_data(omega) -> ProblemSpec:
    """f = 0, g = 0; the exact solution is identically zero."""
    omega = _check_omega(omega)

    def grad(x, y):
        return np.zeros(np.broadcast(x, y).shape + (2,), dtype=complex)

    return ProblemSpec("zero", omega, _zero, grad, _zero, lambda x, y, n: _zero(x, y))


def scaled(problem: ProblemSpec, c: complex) -> ProblemSpec:
    """The same problem with solution and data multiplied by ``c``."""
    return ProblemSpec(
        problem.name,
        problem.omega,
        None if problem.u is None else (lambda x, y: c * problem.u(x, y)),
        None if problem.grad is None else (lambda x, y: c * problem.grad(x, y)),
        lambda x, y: c * problem.f(x, y),
        lambda x, y, n: c * problem.g(x, y, n),
        problem.has_exact,
    )


LSHAPE_ORDER = 2.0 / 3.0


def lshape_angle(x, y):
    """Polar angle about the re-entrant corner, in [pi/2, 5pi/2).

    The L-shaped domain covers angles [pi/2, 2pi]; the branch cut lies in the
    removed quadrant so the solution is smooth away from the origin.
    """
    phi = np.arctan2(y, x)
    return np.mod(phi - np.pi / 2, 2 * np.pi) + np.pi / 2


def lshape_singular(omega) -> ProblemSpec:
    """u(r, phi) = J_{2/3}(omega r) sin(2/3 (pi - phi)), f = 0."""
    omega = _check_omega(omega)
    nu = LSHAPE_ORDER

    def u(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        r = np.hypot(x, y)
        phi = lshape_angle(x, y)
        return (bessel_j(nu, omega * r) * np.sin(nu * (np.pi - phi))).astype(complex)

    def grad(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        r = np.hypot(x, y)
        if np.any(r == 0):
            raise SingularPointError("singular point: gradient is unbounded at r = 0")
        phi = lshape_angle(x, y)
        z = omega * r
        jv = bessel_j(nu, z)
        # J'_nu = (J_{nu-1} - J_{nu+1}) / 2 = (nu / z) J_nu - J_{nu+1}
        djv = nu / z * jv - bessel_j(nu + 1, z)
        ang = nu * (np.pi - phi)
        du_dr = omega * djv * np.sin(ang)
        du_dphi_over_r = -nu * jv * np.cos(ang) / r
        c, s = np.cos(phi), np.sin(phi)
        gx = du_dr * c - du_dphi_over_r * s
        gy = du_dr * s + du_dphi_over_r * c
        return np.stack([gx, gy], axis=-1).astype(complex)

    return ProblemSpec("lshape_singular", omega, u, grad, _zero, impedance_data(omega, u, grad))


PROBLEMS = {"plane_wave": plane_wave, "lshape_singular": lshape_singular}


def get_problem(name: str, omega: float) -> ProblemSpec:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; expected one of {sorted(PROBLEMS)}") from None
    return factory(omega)


# --- Bessel functions of the first kind, real order nu > -1/2 ----------------


def bessel_series(nu: float, x):
    """Ascending power series of J_nu; accurate for moderate x."""
    x = np.asarray(x, dtype=float)
    half = 0.5 * x
    term = np.where(half > 0, half, 1.0) ** nu / math.gamma(nu + 1)
    # limit at x = 0: 1 for nu = 0, 0 for nu > 0, unbounded for nu < 0
    term = np.where(half > 0, term, 1.0 if nu == 0 else (0.0 if nu > 0 else np.inf))
    total = term.copy()
    h2 = half * half
    for m in range(1, _MAX_TERMS):
        term = -np.where(np.isinf(term), 0.0, term) * h2 / (m * (m + nu))
        total += term
        if np.all(np.abs(term) <= 1e-17 * np.maximum(np.abs(total), 1e-300)):
            break
    return total


def bessel_integral(nu: float, x, n_nodes: int | None = None):
    """Poisson integral of J_nu evaluated with Gauss-Jacobi quadrature.

    J_nu(x) = (x/2)^nu / (sqrt(pi) Gamma(nu + 1/2)) * int_{-1}^{1} (1 - t^2)^(nu - 1/2) cos(x t) dt

    The weight is absorbed into the Gauss-Jacobi rule, leaving the entire
    integrand cos(x t), so convergence is spectral.  Valid for nu > -1/2.
    """
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    out = np.empty_like(flat)
    if n_nodes is None:
        # few nodes per magnitude bin: high-order Jacobi rules lose accuracy
        # for strongly singular weights
        bins = np.ceil(flat / 10.0).astype(int)
        groups = [(b, np.flatnonzero(bins == b)) for b in np.unique(bins)]
    else:
        groups = [(None, np.arange(flat.size))]
    for b, idx in groups:
        n = n_nodes if b is None else int(7.5 * b) + 25
        t, w = roots_jacobi(n, nu - 0.5, nu - 0.5)
        chunk = max(1, 2_000_000 // n)
        for start in range(0, idx.size, chunk):
            sel = idx[start:start + chunk]
            out[sel] = np.cos(np.outer(flat[sel], t)) @ w
    out = out.reshape(x.shape)
    return (0.5 * x) ** nu * out / (math.sqrt(math.pi) * math.gamma(nu + 0.5))


def bessel_asymptotic(nu: float, x):
    """Hankel large-argument expansion of J_nu, summed to its smallest term."""
    x = np.asarray(x, dtype=float)
    mu = 4.0 * nu * nu
    P = np.ones_like(x)
    Q = np.zeros_like(x)
    a = 1.0
    prev = np.inf
    for k in range(1, 80):
        a *= (mu - (2 * k - 1) ** 2) / (k * 8.0)
        size = abs(a) / float(np.min(x)) ** k
        if size > prev or size < 1e-18:
            break
        prev = size
        term = a / x**k
        if k % 2:
            Q += term if (k // 2) % 2 == 0 else -term
        else:
            P += -term if (k // 2) % 2 else term
    chi = x - (0.5 * nu + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * (P * np.cos(chi) - Q * np.sin(chi))


def bessel_j(nu: float, x):
    """J_nu(x) for real nu > -1/2 and x >= 0.

    Power series up to x = 8, Poisson integral up to x = 25, Hankel
    expansion beyond.
    """
    if not nu > -0.5:
        raise ValueError(f"unsupported Bessel order {nu}; need nu > -1/2")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("Bessel argument must be non-negative")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    small = x <= SERIES_LIMIT
    large = x > ASYMPTOTIC_LIMIT
    middle = ~small & ~large
    if small.any():
        out[small] = bessel_series(nu, x[small])
    if middle.any():
        out[middle] = bessel_integral(nu, x[middle])
    if large.any():
        out[large] = bessel_asymptotic(nu, x[large])
    return out[0] if scalar else out
