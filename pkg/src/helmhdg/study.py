"""Study configuration, orchestration, CSV output and rate fitting."""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import plots
from .adaptivity import REFINEMENTS, STRATEGIES, AmrResult, MarkingConfig, StudyRecord, amr_loop
from .hdg import HdgConfig
from .mesh import Mesh, generate_l_shape, generate_unit_square
from .problems import PROBLEMS, get_problem


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key."""

    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


_NUMBER = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_OMEGA = re.compile(rf"^\s*(?:({_NUMBER})\s*\*?\s*)?(pi|π)?\s*(?:/\s*({_NUMBER}))?\s*$")


def parse_omega(text: str) -> float:
    """Accept plain numbers and multiples of pi such as ``5*pi``, ``5pi`` or ``pi/2``."""
    m = _OMEGA.match(text)
    if not m or not (m.group(1) or m.group(2)):
        raise ConfigError("omega", f"cannot parse {text!r}")
    value = float(m.group(1)) if m.group(1) else 1.0
    if m.group(2):
        value *= math.pi
    if m.group(3):
        value /= float(m.group(3))
    if not (value > 0 and math.isfinite(value)):
        raise ConfigError("omega", f"must be positive, got {text!r}")
    return value


@dataclass(frozen=True)
class StudyConfig:
    problem: str
    omega: float
    degree: int = 1
    tau: float | str = "omega"
    refinement: str = "uniform"
    theta: float = 0.5
    marking: str = "bulk_squared"
    max_levels: int = 12
    max_elements: int = 200_000
    outdir: str = "."
    initial_n: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError("problem", f"unknown problem {self.problem!r}; expected one of {sorted(PROBLEMS)}")
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise ConfigError("omega", "must be positive")
        if self.degree not in (0, 1, 2, 3):
            raise ConfigError("degree", f"must be 0..3, got {self.degree}")
        try:
            HdgConfig(self.degree, self.tau)
        except ValueError as exc:
            raise ConfigError("tau", str(exc)) from None
        if self.refinement not in REFINEMENTS:
            raise ConfigError("refinement", f"expected one of {list(REFINEMENTS)}")
        if not 0 < self.theta < 1:
            raise ConfigError("theta", "must lie in (0, 1)")
        if self.marking not in STRATEGIES:
            raise ConfigError("marking", f"expected one of {list(STRATEGIES)}")
        if self.max_levels < 1:
            raise ConfigError("max_levels", "must be at least 1")
        if self.max_elements < 1:
            raise ConfigError("max_elements", "must be at least 1")
        if self.initial_n is not None and self.initial_n < 1:
            raise ConfigError("initial_n", "must be at least 1")

    @property
    def hdg_config(self) -> HdgConfig:
        return HdgConfig(self.degree, self.tau)

    @property
    def marking_config(self) -> MarkingConfig:
        return MarkingConfig(self.marking, self.theta)

    def initial_mesh(self) -> Mesh:
        if self.problem == "lshape_singular":
            return generate_l_shape(self.initial_n or 2)
        return generate_unit_square(self.initial_n or 4)


_CASTS = {
    "problem": str,
    "omega": parse_omega,
    "degree": int,
    "tau": lambda v: v if v == "omega" else float(v),
    "refinement": str,
    "theta": float,
    "marking": str,
    "max_levels": int,
    "max_elements": int,
    "outdir": str,
    "initial_n": int,
    "seed": int,
}
_REQUIRED = ("problem", "omega")


def parse_config_text(text: str) -> StudyConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CASTS:
            raise ConfigError(key, "unknown key")
        if key in values:
            raise ConfigError(key, "duplicate key")
        try:
            values[key] = _CASTS[key](value)
        except ConfigError:
            raise
        except ValueError:
            raise ConfigError(key, f"invalid value {value!r}") from None
    for key in _REQUIRED:
        if key not in values:
            raise ConfigError(key, "missing required key")
    return StudyConfig(**values)


def load_config(path) -> StudyConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text)


# --- CSV -------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def write_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(StudyRecord.columns()) + "\n")
        for rec in records:
            fh.write(",".join(_fmt(v) for v in rec.values()) + "\n")


def read_csv(path) -> list[StudyRecord]:
    types = {f.name: f.type for f in fields(StudyRecord)}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != StudyRecord.columns():
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        out = []
        for row in reader:
            out.append(StudyRecord(**{k: (int(v) if types[k] in (int, "int") else float(v)) for k, v in row.items()}))
    return out


# --- rates -----------------------------------------------------------------


def fit_rate(xs, ys, last: int = 4) -> float:
    """Least-squares slope of log(ys) against log(xs) over the last ``last`` points."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("xs and ys must be 1-D of equal length")
    if xs.size < 2:
        raise ValueError("need at least two points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("rate fit needs positive values")
    n = min(last, xs.size)
    return float(np.polyfit(np.log(xs[-n:]), np.log(ys[-n:]), 1)[0])


def convergence_rate(records, column: str, last: int = 4) -> float:
    """Decay rate of ``column`` against Nel^{1/2} (positive when converging)."""
    xs = [math.sqrt(r.nel) for r in records]
    ys = [getattr(r, column) for r in records]
    return -fit_rate(xs, ys, last)


# --- orchestration ---------------------------------------------------------


def run_study(config: StudyConfig, outdir=None, on_level=None) -> AmrResult:
    """Execute the study and write study.csv, convergence.svg and effectivity.svg.

    Output is written even when the loop stopped on a solver failure; the
    failure is then re-raised.
    """
    out = Path(outdir if outdir is not None else config.outdir)
    out.mkdir(parents=True, exist_ok=True)
    problem = get_problem(config.problem, config.omega)
    result = amr_loop(
        config.initial_mesh(),
        problem,
        config.hdg_config,
        config.marking_config,
        max_levels=config.max_levels,
        max_elements=config.max_elements,
        refinement=config.refinement,
        on_level=on_level,
    )
    write_csv(result.records, out / "study.csv")
    title = f"{config.problem}, omega={config.omega:.6g}, k={config.degree}, {config.refinement}"
    (out / "convergence.svg").write_text(plots.convergence_svg(result.records, title))
    (out / "effectivity.svg").write_text(plots.effectivity_svg(result.records, title))
    if result.error is not None:
        raise result.error
    return result
