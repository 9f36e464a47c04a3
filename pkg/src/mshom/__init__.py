"""Two-stage solver for stiff dissipative two-scale ODE systems.

The fast variable is closed by successively refined approximations of the
slow manifold; a resolved coupled stage handles the initial layer and a
decoupled macro stage covers the rest of the horizon.
"""

from .bench import (
    BenchmarkCase,
    CellResult,
    ConvergenceReport,
    FitResult,
    build_config,
    case_reference,
    convergence_sweep,
    fit_loglog,
    naive_exact,
    reference_solution,
    registry,
    run_cell,
)
from .driver import (
    DriverConfig,
    SimulationResult,
    Trajectory,
    run_coupled_stage,
    run_decoupled_stage,
    simulate,
    simulate_coupled_only,
    z_diagnostic,
)
from .errors import (
    DivergenceError,
    MshomError,
    NumericalFailureError,
    SingularityError,
)
from .manifold import (
    ManifoldApproximator,
    ManifoldConfig,
    ManifoldEval,
    directional_difference,
    gamma1_analytic,
    hmm_type1,
    hmm_type2,
    micro_call_count,
)
from .micro import MicroConfig, relax_solve
from .riccati import (
    LinearTwoScale,
    RiccatiSolution,
    riccati_fixed_point,
    riccati_iterates,
)
from .steppers import SCHEMES, VectorField, euler_step, rk4_step
from .system import TwoScaleSystem, check_dissipativity, jacobian_g

__version__ = "0.1.0"

__all__ = [
    "BenchmarkCase",
    "CellResult",
    "ConvergenceReport",
    "DivergenceError",
    "DriverConfig",
    "FitResult",
    "LinearTwoScale",
    "ManifoldApproximator",
    "ManifoldConfig",
    "ManifoldEval",
    "MicroConfig",
    "MshomError",
    "NumericalFailureError",
    "RiccatiSolution",
    "SCHEMES",
    "SimulationResult",
    "SingularityError",
    "Trajectory",
    "TwoScaleSystem",
    "VectorField",
    "build_config",
    "case_reference",
    "check_dissipativity",
    "convergence_sweep",
    "directional_difference",
    "euler_step",
    "fit_loglog",
    "gamma1_analytic",
    "hmm_type1",
    "hmm_type2",
    "jacobian_g",
    "micro_call_count",
    "naive_exact",
    "reference_solution",
    "registry",
    "relax_solve",
    "riccati_fixed_point",
    "riccati_iterates",
    "rk4_step",
    "run_cell",
    "run_coupled_stage",
    "run_decoupled_stage",
    "simulate",
    "simulate_coupled_only",
    "z_diagnostic",
]
