"""Low-rank matrix recovery from compressive linear measurements with
per-direction subspace-prior weighting: recovery-condition bounds, optimal
weight selection, a splitting solver, and a Monte-Carlo experiment harness.
"""

__version__ = "0.1.0"

from .basis import (
    EPS_WEIGHT,
    BlockNorms,
    StructuredBases,
    SupportProjector,
    UnsupportedGeometryError,
    WeightSpec,
    build_Q,
    build_structured_bases,
    invert_Q,
    project_T,
    project_Tperp,
    project_Ttilde,
    triangular_block_norms,
)
from .bounds import (
    AnglePair,
    BoundReport,
    InfeasibleBoundError,
    SingleWeightReport,
    alpha12,
    alpha34,
    bound_report,
    error_constants,
    optimize_weights,
    rip_bound_multi,
    rip_bound_single,
    single_weight_report,
)
from .linalg import (
    DecompositionError,
    Subspace,
    SvdTriple,
    aligned_bases,
    nuclear_norm,
    principal_angles,
    spectral_norm,
    svd,
    truncate,
)
from .measure import (
    MeasurementOperator,
    add_noise,
    adjoint,
    apply,
    empirical_rip_ratios,
    gaussian_operator,
    load_operator,
    save_operator,
    spawn_seeds,
)
from .solver import RecoveryResult, SolverConfig, solve, svt
from .experiments import (
    NRE_SUCCESS_THRESHOLD,
    NullSpaceReport,
    ProblemInstance,
    SweepPoint,
    SweepResult,
    make_instance,
    method_weights,
    nre,
    null_space_check,
    sweep,
    table1,
    weighting_operators,
    write_sweep_csv,
    write_table1_csv,
)

__all__ = [
    "AnglePair", "BlockNorms", "BoundReport", "DecompositionError",
    "EPS_WEIGHT", "InfeasibleBoundError", "MeasurementOperator",
    "NRE_SUCCESS_THRESHOLD", "NullSpaceReport", "ProblemInstance",
    "RecoveryResult", "SingleWeightReport", "SolverConfig", "StructuredBases",
    "Subspace", "SupportProjector", "SvdTriple", "SweepPoint", "SweepResult",
    "UnsupportedGeometryError", "WeightSpec",
    "add_noise", "adjoint", "aligned_bases", "alpha12", "alpha34", "apply",
    "bound_report", "build_Q", "build_structured_bases",
    "empirical_rip_ratios", "error_constants", "gaussian_operator",
    "invert_Q", "load_operator", "make_instance", "method_weights",
    "nre", "nuclear_norm", "null_space_check", "optimize_weights",
    "principal_angles", "project_T", "project_Tperp", "project_Ttilde",
    "rip_bound_multi", "rip_bound_single", "save_operator",
    "single_weight_report", "solve", "spawn_seeds", "spectral_norm", "svd",
    "sweep", "svt", "table1", "triangular_block_norms", "truncate",
    "weighting_operators", "write_sweep_csv", "write_table1_csv",
]
