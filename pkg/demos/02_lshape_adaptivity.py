"""Adaptive versus uniform refinement for the L-shaped corner singularity.

The exact solution J_{2/3}(ωr) sin(2/3(π-φ)) has an unbounded gradient at the
re-entrant corner. Uniform refinement is limited by that singularity. The
estimator-driven loop (Dörfler marking, θ = 0.5, newest-vertex bisection)
concentrates elements at the corner and restores the smooth-solution rate.

Both studies write study.csv, convergence.svg and effectivity.svg.

Run:  python demos/02_lshape_adaptivity.py [outdir] [max_elements]
"""
import sys
from pathlib import Path

from helmhdg.study import StudyConfig, convergence_rate, run_study

outdir = Path(sys.argv[1] if len(sys.argv) > 1 else "lshape_results")
max_elements = int(sys.argv[2]) if len(sys.argv) > 2 else 30_000

for mode in ("uniform", "adaptive"):
    cfg = StudyConfig("lshape_singular", omega=5 * 3.141592653589793, degree=1, refinement=mode,
                      max_levels=60, max_elements=max_elements)
    result = run_study(cfg, outdir / mode)
    rate = convergence_rate(result.records, "triple_norm", last=3)
    last = result.records[-1]
    print(f"{mode:9s} levels={len(result.records):2d} Nel={last.nel:6d} triple={last.triple_norm:.3e} "
          f"eta={last.eta:.3e} rate vs Nel^(1/2): {rate:.2f}")

mesh = result.meshes[-1]
d = mesh.diameters()
K = d.argmin()
print("smallest adaptive element has vertices", mesh.vertices[mesh.triangles[K]].tolist())
print("outputs in", outdir.resolve())
