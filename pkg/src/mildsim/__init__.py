"""Numerical engine for mild solutions of stochastic transport equations.

States are forward curves on the half line stored on weighted grids;
the evolution splits an exact shift semigroup from drift and diffusion
reactions.  The package also carries the diagnostic machinery for
positivity: operator check batteries, smoothed penalty functionals,
coefficient admissibility estimates and ensemble verdicts, with the
forward-rate model family as the flagship application.
"""

__version__ = "0.1.0"

from .grids import Grid, GridFunction, LatticeParts, lattice_parts, norm, weighted_inner
from .kernels import BACKEND, HAVE_NUMBA
from .operators import OperatorSuite, random_bumps
from .coefficients import (
    CoefficientModel,
    ModeFunction,
    PositivityReport,
    estimate_positivity_constant,
    hjm_drift,
    positivity_functional,
)
from .noise import NoiseConfig, Z_BOUND, gaussian_block, gaussian_step, increment_block
from .smoothing import (
    ito_residual,
    penalty_eval,
    smooth_energy,
    supermartingale_stat,
)
from .solver import (
    EnsembleResult,
    EnsembleStats,
    PathResult,
    SolverConfig,
    ensemble_stats,
    lambda_convergence_study,
    run_ensemble,
    simulate_path,
    simulate_regularized,
    step_once,
)
from .hjm import (
    BuiltHJM,
    HJMModelSpec,
    HJMRun,
    bond_curve,
    build_hjm,
    positivity_verdict,
    simulate_forward_rates,
)

__all__ = [
    "__version__",
    "BACKEND",
    "HAVE_NUMBA",
    "Grid",
    "GridFunction",
    "LatticeParts",
    "lattice_parts",
    "norm",
    "weighted_inner",
    "OperatorSuite",
    "random_bumps",
    "CoefficientModel",
    "ModeFunction",
    "PositivityReport",
    "estimate_positivity_constant",
    "hjm_drift",
    "positivity_functional",
    "NoiseConfig",
    "Z_BOUND",
    "gaussian_block",
    "gaussian_step",
    "increment_block",
    "ito_residual",
    "penalty_eval",
    "smooth_energy",
    "supermartingale_stat",
    "SolverConfig",
    "PathResult",
    "EnsembleResult",
    "EnsembleStats",
    "ensemble_stats",
    "run_ensemble",
    "simulate_path",
    "simulate_regularized",
    "step_once",
    "lambda_convergence_study",
    "HJMModelSpec",
    "BuiltHJM",
    "HJMRun",
    "build_hjm",
    "bond_curve",
    "positivity_verdict",
    "simulate_forward_rates",
]
