"""Command line entry point: ``helmhdg solve|study|mesh-info``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
``HDG_THREADS`` caps BLAS/LAPACK threads (0 or unset: library default).
"""
from __future__ import annotations

import argparse
import contextlib
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import hdg as hdg_mod
from .adaptivity import make_record, solve_level
from .mesh import mesh_stats, read_mesh, write_mesh
from .problems import get_problem
from .study import ConfigError, load_config, run_study, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2
NUMERICAL_ERRORS = (hdg_mod.SolverError, np.linalg.LinAlgError, ArithmeticError, RuntimeError)


def thread_limit(env=None) -> int:
    raw = (env if env is not None else os.environ).get("HDG_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("HDG_THREADS", f"expected a non-negative integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError("HDG_THREADS", f"expected a non-negative integer, got {raw!r}")
    return n


def _limits(n: int):
    return threadpool_limits(limits=n) if n > 0 else contextlib.nullcontext()


def cmd_solve(args) -> int:
    config = load_config(args.config)
    out = Path(config.outdir)
    out.mkdir(parents=True, exist_ok=True)
    mesh = config.initial_mesh()
    res = solve_level(mesh, get_problem(config.problem, config.omega), config.hdg_config)
    rec = make_record(0, res, 0.0)
    write_mesh(mesh, out / "mesh.txt")
    hdg_mod.write_solution(res.hdg, out / "solution.hdgsol")
    write_csv([rec], out / "study.csv")
    print(f"Nel={rec.nel} skeleton_dofs={rec.skeleton_dofs} eta={rec.eta:.6e} "
          f"triple={rec.triple_norm:.6e} effectivity={rec.effectivity:.4f}")
    return EXIT_OK


def cmd_study(args) -> int:
    config = load_config(args.config)

    def report(level, res):
        print(f"level {level}: Nel={res.mesh.n_triangles} eta={res.estimate.eta:.6e}", flush=True)

    result = run_study(config, on_level=report)
    print(f"wrote {len(result.records)} levels to {Path(config.outdir) / 'study.csv'}")
    return EXIT_OK


def cmd_mesh_info(args) -> int:
    try:
        mesh = read_mesh(args.meshfile)
    except OSError as exc:
        raise ConfigError("meshfile", f"cannot read {args.meshfile}: {exc.strerror}") from None
    except ValueError as exc:
        raise ConfigError("meshfile", str(exc)) from None
    nel, hmax, min_angle = mesh_stats(mesh)
    print(f"vertices        {mesh.n_vertices}")
    print(f"elements        {nel}")
    print(f"faces           {mesh.n_faces} ({mesh.boundary_faces.size} boundary)")
    print(f"area            {mesh.areas().sum():.12g}")
    print(f"boundary length {mesh.boundary_length():.12g}")
    print(f"h_max           {hmax:.12g}")
    print(f"min angle (deg) {np.degrees(min_angle):.12g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="helmhdg", description="Adaptive HDG solver for the Helmholtz equation.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="single solve on the initial mesh")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("study", help="uniform or adaptive refinement study")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_study)
    p = sub.add_parser("mesh-info", help="print statistics of a mesh file")
    p.add_argument("meshfile")
    p.set_defaults(func=cmd_mesh_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        with _limits(thread_limit()):
            return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # raised by the numerical kernels (degenerate elements, singular points)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
