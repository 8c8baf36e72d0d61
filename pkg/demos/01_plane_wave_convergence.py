"""Convergence of the HDG solution and its postprocessing for a plane wave.

We solve -Δu - ω²u = 0 on the unit square with an impedance boundary, using
u = exp(iω d·x) as the exact solution. The scalar u_h converges like h^(k+1),
and the local postprocessing ν_h gains one more order. At ω = 5π the coarse
meshes do not resolve the wave, so the first rates are visibly worse.

Run:  python demos/01_plane_wave_convergence.py
"""
import numpy as np

from helmhdg import HdgConfig, error_norms, generate_unit_square, minres_postprocess, plane_wave, solve_hdg
from helmhdg.estimator import element_estimator

for omega_label, omega in (("pi", np.pi), ("5pi", 5 * np.pi)):
    for k in (1, 2):
        print(f"\nomega = {omega_label}, k = {k}")
        print(f"{'n':>4} {'||u-u_h||':>11} {'rate':>5} {'||u-nu_h||':>11} {'rate':>5} {'eta':>10} {'eff':>6}")
        prev = None
        for n in (4, 8, 16, 32):
            mesh = generate_unit_square(n)
            problem = plane_wave(omega)
            post = minres_postprocess(solve_hdg(mesh, problem, HdgConfig(degree=k)))
            eta = element_estimator(post).eta
            r = error_norms(mesh, problem, post, eta)
            if prev is None:
                rates = ("", "")
            else:
                rates = (f"{np.log2(prev[0] / r.err_u_uh):5.2f}", f"{np.log2(prev[1] / r.err_u_nu):5.2f}")
            print(f"{n:4d} {r.err_u_uh:11.3e} {rates[0]:>5} {r.err_u_nu:11.3e} {rates[1]:>5} {eta:10.3e} {r.effectivity:6.3f}")
            prev = (r.err_u_uh, r.err_u_nu)
