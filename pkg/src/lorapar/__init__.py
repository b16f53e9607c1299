"""Time-parallel integration of matrix ODEs with low-rank propagators."""

from .bounds import (
    BoundKind,
    BoundParams,
    bound,
    dlra_error_bound,
    estimate_params,
    exact_recursion,
    lyapunov_rank_bound,
    singular_decay_factor,
)
from .integrators import (
    FlowOptions,
    calibrate_substeps,
    dlra_flow,
    exact_flow_lyapunov,
    measure_epsilon,
    reference_flow,
)
from .lowrank import (
    LowRankMatrix,
    SingularSpectrum,
    add,
    combine,
    from_dense,
    from_factors,
    singular_values,
    tangent_project,
    truncate,
    truncate_tol,
)
from .mmio import dump_factors, load_matrix_market, save_matrix_market
from .parareal import (
    ConvergenceRecord,
    PararealConfig,
    PararealResult,
    errors_vs_reference,
    make_perturbation,
    run_adaptive_parareal,
    run_lowrank_parareal,
)
from .problems import (
    SpectrumSpec,
    VectorField,
    build_cookie_synthetic,
    build_laplacian_1d,
    build_riccati_C,
    build_riccati_diffusion,
    eval_field,
    lyapunov_field,
    random_with_spectrum,
    riccati_field,
    sylvester_field,
    warm_start,
)

__version__ = "0.1.0"
