"""Stochastic numerics for fractional Brownian motion driven rough
differential equations: exact fBm sampling, 2D p-variation machinery,
geometric rough-path lifts, a second-order solver, and a Monte Carlo
harness probing weak continuity of solution laws in the Hurst parameter.
"""

__version__ = "0.1.0"

from .fbm import (
    HurstParam,
    SamplePath,
    SamplingError,
    TimeGrid,
    covariance,
    covariance_matrix,
    increment_covariance,
    sample_fbm,
)
from .variation import (
    CapacityError,
    GridFunction2D,
    GridPartition2D,
    Rectangle,
    Tessellation,
    TessellationError,
    c_constant,
    check_superadditivity,
    controlled_p_variation_lower_bound,
    covariance_grid,
    dyadic_staircase,
    grid_p_variation,
    holder_seminorm,
    p_variation_1d,
    rect_increment,
    zeta_real,
)
from .roughpath import (
    RoughPath,
    chen_defect,
    homogeneous_norm,
    lift_geometric,
    max_chen_defect,
    read_roughpath_csv,
    rough_distance,
    scale,
    write_roughpath_csv,
)
from .rde import (
    RDESolution,
    SolverBlowupError,
    VectorFieldSpec,
    named_vector_field,
    solution_map_modulus,
    solve_rde,
)
from .experiment import (
    BoundViolationError,
    ExperimentConfig,
    ExperimentReport,
    ReplicateFailure,
    X0Law,
    energy_distance,
    load_report_json,
    run_continuity_experiment,
    save_report_json,
    tightness_diagnostic,
    two_sample_ks,
    verify_covariance_bound,
)
