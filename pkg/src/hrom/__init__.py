"""Online basis refinement for projection-based reduced-order models.

Reduced bases are built by POD over training snapshots and refined online
by splitting basis vectors along a precomputed hierarchical clustering of
the state degrees of freedom, driven by dual-weighted-residual error
indicators.
"""

from .adapt import (
    AdaptConfig,
    AdaptError,
    AdaptStats,
    AdaptStepResult,
    RefineInfo,
    adapt_step,
    mark_vectors,
    refine_child_grouping,
    refine_plain,
)
from .dwr import (
    AdjointSingularError,
    AdjointSolution,
    ErrorIndicators,
    compute_indicators,
    solve_coarse_adjoint,
)
from .fom import (
    BurgersConfig,
    BurgersProblem,
    FomProblem,
    LinearProblem,
    NewtonError,
    godunov_flux,
    newton_solve,
    solve_fom,
)
from .linalg import (
    ClusterAssignment,
    PivotedQr,
    SvdResult,
    kmeans,
    pseudoinverse_apply,
    qr_column_pivot,
    thin_svd,
)
from .config import ConfigError, ExperimentSpec, load_spec
from .experiment import (
    MetricsReport,
    RomRunResult,
    TrainArtifacts,
    compare,
    load_artifacts,
    relative_error,
    run_fom,
    run_rom,
    save_artifacts,
    shock_front_cell,
    sweep,
    train,
)
from .rom import PodBasis, RomNewtonError, RomStepSolution, build_pod, solve_rom_step
from .splitting import (
    ChildIndexMap,
    Prolongation,
    RefinedBasis,
    fine_basis,
    is_fully_split,
    prolong,
    restrict,
)
from .tree import (
    SplitTree,
    ValidityReport,
    Violation,
    build_tree,
    load_tree,
    preprocess_snapshots,
    save_tree,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig",
    "AdaptError",
    "AdaptStats",
    "AdaptStepResult",
    "AdjointSingularError",
    "AdjointSolution",
    "BurgersConfig",
    "BurgersProblem",
    "ChildIndexMap",
    "ClusterAssignment",
    "ConfigError",
    "ErrorIndicators",
    "ExperimentSpec",
    "FomProblem",
    "LinearProblem",
    "MetricsReport",
    "NewtonError",
    "PivotedQr",
    "PodBasis",
    "Prolongation",
    "RefineInfo",
    "RefinedBasis",
    "RomNewtonError",
    "RomRunResult",
    "RomStepSolution",
    "SplitTree",
    "SvdResult",
    "TrainArtifacts",
    "ValidityReport",
    "Violation",
    "adapt_step",
    "build_pod",
    "build_tree",
    "compare",
    "compute_indicators",
    "fine_basis",
    "godunov_flux",
    "is_fully_split",
    "kmeans",
    "load_artifacts",
    "load_spec",
    "load_tree",
    "mark_vectors",
    "newton_solve",
    "preprocess_snapshots",
    "prolong",
    "pseudoinverse_apply",
    "qr_column_pivot",
    "refine_child_grouping",
    "refine_plain",
    "relative_error",
    "restrict",
    "run_fom",
    "run_rom",
    "save_artifacts",
    "save_tree",
    "shock_front_cell",
    "solve_coarse_adjoint",
    "solve_fom",
    "solve_rom_step",
    "sweep",
    "thin_svd",
    "train",
    "validate",
]
