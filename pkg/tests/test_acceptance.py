"""Acceptance criteria 1-10.  Each test prints one PASS/FAIL line (also collected in
the terminal summary) and then asserts at the stated tolerance."""
import time

import numpy as np
import pytest

from helmhdg import felab
from helmhdg.adaptivity import MarkingConfig, amr_loop, doerfler_mark
from helmhdg.estimator import element_estimator, error_norms
from helmhdg.hdg import HdgConfig, solve_hdg
from helmhdg.mesh import check_mesh, generate_l_shape, generate_unit_square
from helmhdg.postprocess import (
    aux_theta,
    embed,
    flux_plus_grad_dual_norm,
    grad_norm,
    minres_postprocess,
    stenberg_postprocess,
    stiffness,
)
from helmhdg.problems import lshape_singular, zero_data
from helmhdg.study import convergence_rate, fit_rate

from conftest import acceptance_report, plane_wave_solution
from test_adaptivity import brute_force_bulk

LEVELS = (4, 8, 16, 32)


def l2_errors(omega, k):
    """(h, ||u - u_h||, ||u - nu_h||) over the uniform levels."""
    hs, e_uh, e_nu = [], [], []
    for n in LEVELS:
        mesh, problem, _, post = plane_wave_solution(omega, n, k)
        r = error_norms(mesh, problem, post)
        hs.append(1.0 / n)
        e_uh.append(r.err_u_uh)
        e_nu.append(r.err_u_nu)
    return np.array(hs), np.array(e_uh), np.array(e_nu)


def stenberg_gap(hdg, post):
    sten = stenberg_postprocess(hdg)
    scale = np.maximum(np.linalg.norm(sten, axis=1), 1e-300)
    return float(np.max(np.linalg.norm(post.nu - sten, axis=1) / scale))


def test_criterion_01_zero_data_exactness():
    start = time.perf_counter()
    worst = 0.0
    for n in (1, 2, 4, 8, 16):
        mesh = generate_unit_square(n)
        problem = zero_data(np.pi)
        for k in (0, 1, 2):
            hdg = solve_hdg(mesh, problem, HdgConfig(k))
            post = minres_postprocess(hdg)
            field = element_estimator(post)
            r = error_norms(mesh, problem, post, field.eta)
            values = [
                np.abs(hdg.q).max(), np.abs(hdg.u).max(), np.abs(hdg.uhat).max(),
                np.abs(post.nu).max(), np.abs(post.eps).max(), np.abs(aux_theta(hdg)).max(),
                field.eta_K.max(), r.triple_norm, r.err_u_uh,
            ]
            worst = max(worst, max(values))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 5.0
    acceptance_report(1, "zero-data exactness", ok, f"max |quantity| = {worst:.1e}, {elapsed:.2f} s")
    assert worst <= 1e-10
    assert elapsed < 5.0


def test_criterion_02_smooth_convergence_rates():
    start = time.perf_counter()
    h, e_uh, e_nu = l2_errors(np.pi, 1)
    _, _, e_nu2 = l2_errors(np.pi, 2)
    r_uh, r_nu, r_nu2 = fit_rate(h, e_uh), fit_rate(h, e_nu), fit_rate(h, e_nu2)
    elapsed = time.perf_counter() - start
    ok = 1.8 <= r_uh <= 2.3 and 2.8 <= r_nu <= 3.3 and 3.7 <= r_nu2 <= 4.4 and elapsed < 120
    acceptance_report(2, "smooth convergence rates", ok,
                      f"k=1 u_h {r_uh:.3f}, nu_h {r_nu:.3f}; k=2 nu_h {r_nu2:.3f}; {elapsed:.1f} s")
    assert 1.8 <= r_uh <= 2.3
    assert 2.8 <= r_nu <= 3.3
    assert 3.7 <= r_nu2 <= 4.4
    assert elapsed < 120


def test_criterion_03_preasymptotic_behaviour():
    h, e_uh, e_nu = l2_errors(5 * np.pi, 1)
    first_nu, last_nu = fit_rate(h[:2], e_nu[:2]), fit_rate(h[-2:], e_nu[-2:])
    first_uh, last_uh = fit_rate(h[:2], e_uh[:2]), fit_rate(h[-2:], e_uh[-2:])
    ok = first_nu < last_nu and first_uh < last_uh and last_nu >= 2.5
    acceptance_report(3, "pre-asymptotic behaviour", ok,
                      f"nu_h rate first {first_nu:.2f} < last {last_nu:.2f}; u_h first {first_uh:.2f} < last {last_uh:.2f}")
    assert first_nu < last_nu
    assert first_uh < last_uh
    assert last_nu >= 2.5


def test_criterion_04_stenberg_equivalence():
    gaps = []
    for omega in (np.pi, 5 * np.pi):
        for k in (1, 2):
            for n in LEVELS:
                _, _, hdg, post = plane_wave_solution(omega, n, k)
                gaps.append(stenberg_gap(hdg, post))
    for level_result in _lshape_levels():
        gaps.append(stenberg_gap(level_result.hdg, level_result.post))
    worst = max(gaps)
    acceptance_report(4, "Stenberg equivalence", worst <= 1e-10, f"max relative difference {worst:.1e} over {len(gaps)} solves")
    assert worst <= 1e-10


def _lshape_levels():
    levels = []
    amr_loop(generate_l_shape(2), lshape_singular(5 * np.pi), HdgConfig(1), MarkingConfig(), max_levels=8,
             on_level=lambda level, res: levels.append(res))
    return levels


def test_criterion_05_saddle_point_identities():
    worst = {"orthogonality": 0.0, "dual norm": 0.0, "theta": 0.0}
    for k in (1, 2):
        mesh, _, hdg, post = plane_wave_solution(np.pi, 8, k)
        n1 = felab.poly_dim(k + 1)
        S = stiffness(mesh, k)
        eps_norm = grad_norm(mesh, post.eps, k + 2)
        inner = np.einsum("nij,nj->ni", S[:, 1:n1, :], post.eps)
        wnorm = np.sqrt(np.einsum("nii->ni", S[:, 1:n1, 1:n1]))
        worst["orthogonality"] = max(worst["orthogonality"], np.max(np.abs(inner) / (wnorm * eps_norm[:, None])))
        dual = flux_plus_grad_dual_norm(post)
        worst["dual norm"] = max(worst["dual norm"], np.max(np.abs(dual - eps_norm) / eps_norm))
        theta = aux_theta(hdg)
        gap = grad_norm(mesh, theta - embed(post.nu, theta.shape[1]), k + 2)
        worst["theta"] = max(worst["theta"], np.max(np.abs(gap - eps_norm) / eps_norm))
    ok = all(v <= 1e-10 for v in worst.values())
    acceptance_report(5, "saddle-point identities", ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    for v in worst.values():
        assert v <= 1e-10


def test_criterion_06_efficiency_inequality():
    worst = 0.0
    for k in (1, 2):
        for n in LEVELS:
            mesh, problem, _, post = plane_wave_solution(np.pi, n, k)
            field = element_estimator(post)
            r = error_norms(mesh, problem, post, field.eta)
            ratio = field.eta_K**2 / (r.local_1omega_sq + r.local_q_sq)
            worst = max(worst, float(ratio.max()))
    acceptance_report(6, "efficiency inequality", worst <= 3.03, f"max eta_K^2 / local error^2 = {worst:.3f} (bound 3.03)")
    assert worst <= 3.03


def test_criterion_07_effectivity_stability():
    effs = []
    for n in LEVELS:
        mesh, problem, _, post = plane_wave_solution(np.pi, n, 1)
        effs.append(error_norms(mesh, problem, post).effectivity)
    effs = np.array(effs)
    band = effs[-3:].max() / effs[-3:].min()
    ok = band <= 1.5 and np.all((effs >= 0.05) & (effs <= 20))
    acceptance_report(7, "effectivity stability", ok, f"indices {np.round(effs, 3).tolist()}, last-three band {band:.3f}")
    assert band <= 1.5
    assert np.all((effs >= 0.05) & (effs <= 20))


def test_criterion_08_singular_adaptivity():
    start = time.perf_counter()
    problem = lshape_singular(5 * np.pi)
    common = dict(max_levels=60, max_elements=100_000)
    uniform = amr_loop(generate_l_shape(2), problem, HdgConfig(1), refinement="uniform", **common)
    adaptive = amr_loop(generate_l_shape(2), problem, HdgConfig(1), MarkingConfig(), refinement="adaptive", **common)
    elapsed = time.perf_counter() - start
    # asymptotic window: the last three levels of each run
    r_uni = convergence_rate(uniform.records, "triple_norm", last=3)
    r_ada = convergence_rate(adaptive.records, "triple_norm", last=3)
    r_uni4 = convergence_rate(uniform.records, "triple_norm", last=4)
    final = adaptive.meshes[-1]
    d = final.diameters()
    origin = np.flatnonzero(np.all(final.vertices == 0.0, axis=1))[0]
    touches = bool(d[np.any(final.triangles == origin, axis=1)].min() <= d.min() * (1 + 1e-12))
    max_nel = max(r.nel for r in uniform.records + adaptive.records)
    ok = r_uni <= 1.0 and r_ada >= 1.7 and touches and elapsed < 300 and max_nel <= 100_000
    acceptance_report(
        8, "singular-problem adaptivity", ok,
        f"uniform rate {r_uni:.2f} (4-level fit {r_uni4:.2f}), adaptive rate {r_ada:.2f}, "
        f"min element at corner {touches}, Nel <= {max_nel}, {elapsed:.0f} s",
    )
    assert uniform.error is None and adaptive.error is None
    assert r_uni <= 1.0
    assert r_ada >= 1.7
    assert touches
    assert max_nel <= 100_000
    assert elapsed < 300


def test_criterion_09_marking_oracle():
    rng = np.random.default_rng(9)
    mismatches = 0
    for _ in range(200):
        size = int(rng.integers(1, 13))
        etas = rng.random(size) * 10.0 ** rng.uniform(-3, 3)
        if rng.random() < 0.3:  # exercise ties
            etas = rng.integers(0, 4, size).astype(float)
            if not etas.any():
                etas[0] = 1.0
        theta = float(rng.uniform(0.05, 0.95))
        got = set(doerfler_mark(etas, MarkingConfig("bulk_squared", theta)).tolist())
        mismatches += got != brute_force_bulk(etas, theta)
    acceptance_report(9, "marking oracle", mismatches == 0, f"{mismatches} mismatches in 200 instances")
    assert mismatches == 0


def test_criterion_10_mesh_invariants():
    initial = generate_l_shape(2)
    out = amr_loop(initial, lshape_singular(5 * np.pi), HdgConfig(1), MarkingConfig(), max_levels=11)
    mesh = out.meshes[-1]
    problems = []
    try:
        check_mesh(mesh, 3.0)
    except AssertionError as exc:
        problems.append(f"check_mesh: {exc}")
    if not np.all(mesh.areas() > 0):
        problems.append("non-positive area")
    if abs(mesh.boundary_length() - 8.0) > 1e-9:
        problems.append(f"boundary length {mesh.boundary_length()!r}")
    if mesh.n_vertices - mesh.n_faces + mesh.n_triangles != 1:
        problems.append("Euler characteristic")
    ratio = mesh.min_angle() / initial.min_angle()
    if ratio < 0.5:
        problems.append(f"min angle ratio {ratio:.3f}")
    acceptance_report(10, "mesh invariants", not problems,
                      f"{len(out.meshes) - 1} refinements, Nel {mesh.n_triangles}, boundary {mesh.boundary_length():.12f}, "
                      f"angle ratio {ratio:.3f}" + (f"; {problems}" if problems else ""))
    assert not problems
    assert len(out.meshes) == 11
