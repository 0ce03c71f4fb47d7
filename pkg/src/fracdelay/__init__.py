"""Finite element solver for delayed time-fractional reaction-diffusion equations."""

from .fem import FeSpace, assemble_load, assemble_mass, assemble_stiffness, build_space, l2_error, ritz_project
from .fracquad import (
    FractionalWeights,
    frac_derivative_apply,
    grunwald_weights,
    mittag_leffler,
    phi_sequence,
)
from .gronwall import GronwallParams, gronwall_bound, recursion_oracle
from .mesh import Mesh, build_mesh
from .problems import ProblemSpec, get_problem, mackey_glass_2d, nicholson_3d
from .stepper import Scheme, init_history, run, step
from .study import ConvergenceReport, StudyConfig, gronwall_verify, run_study

__version__ = "0.1.0"
