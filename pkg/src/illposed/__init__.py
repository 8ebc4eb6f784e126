"""Ill-posed linear operator equations solved from noisy data.

The solver integrates u' = -u + (A^T A + eps(t))^{-1} A^T f_delta from
zero up to a stopping time chosen by the discrepancy principle, and the
final state approximates the minimal-norm solution of A u = f as the
noise level shrinks.  A variational discrepancy principle for nonlinear
monotone operators is included, along with seeded ill-posed test
problems and a reproducible CLI.
"""

from .discrepancy import (DiscrepancyProfile, StoppingResult, build_profile,
                          discrepancy_value, solve_for_epsilon,
                          stop_from_profile, stopping_time)
from .dsm import DSMConfig, DSMResult, Trajectory, evolve, rhs, run_dsm
from .errors import (ConfigError, DimensionMismatchError, IllposedError,
                     NumericalError, PreconditionError)
from .nonlinear import (MonotoneOperator, NearMinimizer, NonlinearStopping,
                        SeparableMonotoneOperator, check_monotonicity,
                        functional_F, near_minimize, nonlinear_discrepancy,
                        nonlinear_discrepancy_result)
from .operators import (DenseOperator, SpectralDecomposition, as_vector,
                        decompose, load_matrix, load_operator, load_vector,
                        normalize, project_range_closure,
                        regularized_normal_solve,
                        regularized_normal_solve_direct, save_matrix,
                        save_operator, save_vector)
from .problems import (NoiseSpec, TestProblem, add_noise,
                       cubic_separable_problem, gaussian_blur_problem,
                       hilbert_problem, identity_problem,
                       rank_deficient_problem)
from .schedule import (AdmissibilityReport, PowerLawSchedule, Schedule,
                       default_schedule)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityReport",
    "ConfigError",
    "DSMConfig",
    "DSMResult",
    "DenseOperator",
    "DimensionMismatchError",
    "DiscrepancyProfile",
    "IllposedError",
    "MonotoneOperator",
    "NearMinimizer",
    "NoiseSpec",
    "NonlinearStopping",
    "NumericalError",
    "PowerLawSchedule",
    "PreconditionError",
    "Schedule",
    "SeparableMonotoneOperator",
    "SpectralDecomposition",
    "StoppingResult",
    "TestProblem",
    "Trajectory",
    "add_noise",
    "as_vector",
    "build_profile",
    "check_monotonicity",
    "cubic_separable_problem",
    "decompose",
    "default_schedule",
    "discrepancy_value",
    "evolve",
    "functional_F",
    "gaussian_blur_problem",
    "hilbert_problem",
    "identity_problem",
    "load_matrix",
    "load_operator",
    "load_vector",
    "near_minimize",
    "nonlinear_discrepancy",
    "nonlinear_discrepancy_result",
    "normalize",
    "project_range_closure",
    "rank_deficient_problem",
    "regularized_normal_solve",
    "regularized_normal_solve_direct",
    "rhs",
    "run_dsm",
    "save_matrix",
    "save_operator",
    "save_vector",
    "solve_for_epsilon",
    "stop_from_profile",
    "stopping_time",
]
