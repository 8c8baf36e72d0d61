import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import jv

from helmhdg.problems import (
    ASYMPTOTIC_LIMIT,
    SERIES_LIMIT,
    SingularPointError,
    bessel_asymptotic,
    bessel_integral,
    bessel_j,
    bessel_series,
    get_problem,
    lshape_angle,
    lshape_singular,
    plane_wave,
    zero_data,
)

ORDERS = [-1 / 3, 0.0, 0.5, 2 / 3, 1.0, 5 / 3, 2.5]


def test_half_order_closed_form():
    x = np.linspace(0.01, 60, 500)
    assert np.allclose(bessel_j(0.5, x), np.sqrt(2 / (np.pi * x)) * np.sin(x), atol=1e-13, rtol=0)


@pytest.mark.parametrize("nu", ORDERS)
def test_against_scipy(nu):
    x = np.concatenate([[0.0], np.linspace(1e-3, 100, 2001)])
    got, ref = bessel_j(nu, x), jv(nu, x)
    assert got[0] == ref[0]
    assert np.max(np.abs(got[1:] - ref[1:]) / np.maximum(1.0, np.abs(ref[1:]))) < 1e-12


@pytest.mark.parametrize("nu", ORDERS)
def test_methods_agree_where_they_overlap(nu):
    # two independent evaluation routes on each switch point
    x = np.linspace(0.5 * SERIES_LIMIT, SERIES_LIMIT, 40)
    assert np.allclose(bessel_series(nu, x), bessel_integral(nu, x), atol=1e-13, rtol=0)
    x = np.linspace(ASYMPTOTIC_LIMIT, 1.4 * ASYMPTOTIC_LIMIT, 40)
    assert np.allclose(bessel_asymptotic(nu, x), bessel_integral(nu, x), atol=1e-12, rtol=0)


def test_bessel_small_argument_limit():
    assert bessel_j(0.0, 0.0) == 1.0
    assert bessel_j(2 / 3, 0.0) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.05, 80.0))
def test_three_term_recurrence(nu, x):
    # J_{nu-1} + J_{nu+1} = (2 nu / x) J_nu, usable for nu - 1 > -1/2
    nu = nu + 0.6
    lhs = bessel_j(nu - 1, x) + bessel_j(nu + 1, x)
    rhs = 2 * nu / x * bessel_j(nu, x)
    assert abs(lhs - rhs) <= 1e-11 * max(1.0, abs(rhs))


def test_bessel_rejects_bad_input():
    with pytest.raises(ValueError):
        bessel_j(-0.6, 1.0)
    with pytest.raises(ValueError):
        bessel_j(0.5, -1.0)


def _laplacian_fd(u, x, y, h=1e-3):
    return (u(x + h, y) + u(x - h, y) + u(x, y + h) + u(x, y - h) - 4 * u(x, y)) / h**2


def _grad_fd(u, x, y, h=1e-6):
    return np.stack([(u(x + h, y) - u(x - h, y)) / (2 * h), (u(x, y + h) - u(x, y - h)) / (2 * h)], axis=-1)


@pytest.mark.parametrize("factory,pts", [
    (plane_wave, np.array([[0.2, 0.3], [0.7, 0.9], [0.5, 0.1]])),
    (lshape_singular, np.array([[-0.5, 0.4], [-0.3, -0.6], [0.6, -0.2], [-0.9, 0.05], [0.1, 0.8]])),
])
@pytest.mark.parametrize("omega", [np.pi, 5 * np.pi])
def test_solves_helmholtz_and_gradient_matches(factory, pts, omega):
    pr = factory(omega)
    x, y = pts.T
    u = pr.u(x, y)
    residual = _laplacian_fd(pr.u, x, y) + omega**2 * u  # f = 0
    scale = omega**2 * np.max(np.abs(u)) + 1
    assert np.max(np.abs(residual)) < 1e-4 * scale * max(1, omega**2 / 10)
    assert np.allclose(pr.grad(x, y), _grad_fd(pr.u, x, y), atol=1e-6 * omega)
    assert np.allclose(pr.f(x, y), 0)


def test_impedance_data_definition():
    pr = plane_wave(2.0)
    x, y = np.array([1.0, 0.3]), np.array([0.4, 0.0])
    n = np.array([[1.0, 0.0], [0.0, -1.0]])
    expected = np.sum(pr.grad(x, y) * n, axis=-1) + 1j * 2.0 * pr.u(x, y)
    assert np.allclose(pr.g(x, y, n), expected)


def test_lshape_values():
    omega = 5 * np.pi
    pr = lshape_singular(omega)
    # zero on the negative x-axis, phi = pi
    assert np.allclose(pr.u(np.array([-0.3, -0.9]), np.array([0.0, 0.0])), 0.0, atol=1e-15)
    # phi = pi/2 gives sin(pi/3)
    r = 0.37
    assert pr.u(np.array([0.0]), np.array([r]))[0] == pytest.approx(jv(2 / 3, omega * r) * np.sin(np.pi / 3))
    assert pr.u(np.array([0.0]), np.array([0.0]))[0] == 0.0
    with pytest.raises(SingularPointError, match="singular point"):
        pr.grad(np.array([0.0]), np.array([0.0]))


def test_lshape_angle_branch():
    assert lshape_angle(0.0, 1.0) == pytest.approx(np.pi / 2)
    assert lshape_angle(-1.0, 0.0) == pytest.approx(np.pi)
    assert lshape_angle(0.0, -1.0) == pytest.approx(3 * np.pi / 2)
    assert lshape_angle(1.0, -1e-12) == pytest.approx(2 * np.pi)


def test_registry_and_validation():
    assert get_problem("plane_wave", 1.0).name == "plane_wave"
    with pytest.raises(ValueError, match="unknown problem"):
        get_problem("nope", 1.0)
    with pytest.raises(ValueError):
        plane_wave(0.0)
    z = zero_data(3.0)
    assert np.all(z.u(np.ones(3), np.ones(3)) == 0)
