"""Fourier pseudo-spectral solver for the square phase field crystal
equation on periodic boxes: energy-stable BDF2 time stepping driven by a
preconditioned steepest descent solver, plus the verification harness and a
command-line front end.
"""

from .grid import Grid
from .spectral import (
    Field,
    SpectralField,
    forward_transform,
    inverse_transform,
    sample,
    grad,
    div,
    laplacian,
    apply_symbol,
    neg_laplacian_pow,
    inner,
    norm_l2,
    norm_lp,
    norm_hm1,
    norm_h1,
    norm_h2,
)
from .model import (
    Scheme,
    ModelParams,
    StepContext,
    energy,
    p_laplacian_term,
    chemical_potential,
    mu_zero,
    nonlinear_operator,
    rhs,
    objective,
    ManufacturedSolution,
)
from .psd import PsdConfig, SolveStats, psd_solve, precondition_solve, solve_cubic_monotone
from .stepper import SimState, EnergyRecord, ghost_init, initial_state, modified_energy, step, run
from .harness import (
    PatternConfig,
    ConvergenceRow,
    random_init,
    order_fit,
    spatial_convergence_study,
    temporal_convergence_study,
    pattern_experiment,
    verify_suite,
)

__version__ = "0.1.0"
