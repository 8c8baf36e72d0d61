"""Adaptive hybridizable discontinuous Galerkin solver for the 2D Helmholtz equation
with an impedance boundary condition, local postprocessing and a residual estimator."""

from .adaptivity import MarkingConfig, StudyRecord, amr_loop, doerfler_mark
from .estimator import element_estimator, error_norms, global_estimator
from .hdg import HdgConfig, HdgSolution, SolverError, solve_hdg
from .mesh import Mesh, bisect, build_mesh, generate_l_shape, generate_unit_square, read_mesh, write_mesh
from .postprocess import minres_postprocess, stenberg_postprocess
from .problems import get_problem, lshape_singular, plane_wave, zero_data
from .study import StudyConfig, fit_rate, load_config, run_study

__version__ = "0.1.0"
