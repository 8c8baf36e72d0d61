"""Dörfler marking and the solve / estimate / mark / refine loop."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .estimator import EstimateField, ErrorReport, element_estimator, error_norms
from .hdg import HdgConfig, HdgSolution, solve_hdg
from .mesh import Mesh, bisect, refine_uniform
from .postprocess import PostSolution, minres_postprocess
from .problems import ProblemSpec

STRATEGIES = ("bulk_squared", "paper_literal")
REFINEMENTS = ("adaptive", "uniform")


@dataclass(frozen=True)
class MarkingConfig:
    strategy: str = "bulk_squared"
    theta: float = 0.5

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"marking: unknown strategy {self.strategy!r}")
        if not 0.0 < float(self.theta) < 1.0:
            raise ValueError(f"theta: must lie in (0, 1), got {self.theta}")


@dataclass(frozen=True)
class StudyRecord:
    level: int
    nel: int
    skeleton_dofs: int
    h_max: float
    err_u_uh: float
    err_u_nu: float
    err_grad_u_nu: float
    err_q_qh: float
    triple_norm: float
    eta: float
    effectivity: float
    wall_time: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def values(self) -> list:
        return [getattr(self, name) for name in self.columns()]


def _descending_order(etas: np.ndarray) -> np.ndarray:
    # primary key -eta, secondary key index (lexsort sorts by the last key first)
    return np.lexsort((np.arange(etas.size), -etas))


def doerfler_mark(etas, config: MarkingConfig | None = None) -> np.ndarray:
    """Indices of the marked elements, in descending-eta order."""
    config = config or MarkingConfig()
    etas = np.asarray(etas, dtype=float).ravel()
    if etas.size == 0:
        raise ValueError("no elements to mark")
    if np.any(etas < 0) or not np.all(np.isfinite(etas)):
        raise ValueError("estimator values must be finite and non-negative")
    if not np.any(etas > 0):
        raise ValueError("estimator identically zero")
    # the criterion is scale invariant; normalising avoids under- and overflow
    etas = etas / etas.max()
    order = _descending_order(etas)
    if config.strategy == "bulk_squared":
        cum = np.cumsum(etas[order] ** 2)
        count = int(np.searchsorted(cum, config.theta * cum[-1], side="left")) + 1
    else:
        cum = np.cumsum(etas[order])
        bound = config.theta * math.sqrt(float(np.sum(etas**2)))
        count = max(1, int(np.searchsorted(cum, bound, side="right")))
    return order[:count]


@dataclass
class LevelResult:
    mesh: Mesh
    hdg: HdgSolution
    post: PostSolution
    estimate: EstimateField
    errors: ErrorReport | None


@dataclass
class AmrResult:
    """Records per level, the mesh sequence and, if the loop aborted, the error."""

    records: list[StudyRecord] = field(default_factory=list)
    meshes: list[Mesh] = field(default_factory=list)
    last: LevelResult | None = None
    error: Exception | None = None

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def solve_level(mesh: Mesh, problem: ProblemSpec, config: HdgConfig) -> LevelResult:
    hdg = solve_hdg(mesh, problem, config)
    post = minres_postprocess(hdg)
    est = element_estimator(post)
    errors = error_norms(mesh, problem, post, est.eta) if problem.has_exact else None
    return LevelResult(mesh, hdg, post, est, errors)


def make_record(level: int, res: LevelResult, wall_time: float) -> StudyRecord:
    mesh = res.mesh
    nan = float("nan")
    e = res.errors
    return StudyRecord(
        level=level,
        nel=mesh.n_triangles,
        skeleton_dofs=mesh.n_faces * (res.hdg.degree + 1),
        h_max=float(mesh.diameters().max()),
        err_u_uh=e.err_u_uh if e else nan,
        err_u_nu=e.err_u_nu if e else nan,
        err_grad_u_nu=e.err_grad_u_nu if e else nan,
        err_q_qh=e.err_q_qh if e else nan,
        triple_norm=e.triple_norm if e else nan,
        eta=res.estimate.eta,
        effectivity=e.effectivity if e else nan,
        wall_time=wall_time,
    )


def amr_loop(
    mesh: Mesh,
    problem: ProblemSpec,
    hdg_config: HdgConfig | None = None,
    marking: MarkingConfig | None = None,
    max_levels: int = 12,
    max_elements: int = 200_000,
    refinement: str = "adaptive",
    on_level=None,
) -> AmrResult:
    """Run up to ``max_levels`` levels, never solving on a mesh above ``max_elements``.

    ``on_level(level, LevelResult)`` is called after each solve.  Solver
    failures end the loop; the partial history is returned with ``error`` set.
    """
    hdg_config = hdg_config or HdgConfig()
    marking = marking or MarkingConfig()
    if refinement not in REFINEMENTS:
        raise ValueError(f"refinement: unknown mode {refinement!r}")
    if max_levels < 1:
        raise ValueError("max_levels: must be at least 1")
    out = AmrResult()
    for level in range(max_levels):
        if mesh.n_triangles > max_elements:
            break
        start = time.perf_counter()
        try:
            res = solve_level(mesh, problem, hdg_config)
        except (RuntimeError, np.linalg.LinAlgError) as exc:
            out.error = exc
            break
        out.meshes.append(mesh)
        out.records.append(make_record(level, res, time.perf_counter() - start))
        out.last = res
        if on_level is not None:
            on_level(level, res)
        if level == max_levels - 1:
            break
        if refinement == "uniform":
            mesh = refine_uniform(mesh, 2)
        else:
            if res.estimate.eta == 0.0:
                break
            mesh = bisect(mesh, doerfler_mark(res.estimate.eta_K, marking))
    return out
