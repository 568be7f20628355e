"""Depth-weighted Bayesian source imaging for linear inverse problems.

The package solves ``y = L x + xi`` for block-structured x (one d-vector
per source location) under sensitivity-weighted sparsity priors, with a
spherical-head forward simulator and a reproducible experiment harness.
"""
from ._version import __version__
from .exceptions import (
    BesiError,
    ConfigError,
    DefiniteMatrixError,
    DegenerateDataError,
    GeometryError,
    NumericalError,
    UnsupportedModelError,
)
from .model import (
    LeadField,
    Measurement,
    NoiseModel,
    SourceEstimate,
    SourceSpace,
    residual_norm,
    whiten,
)
from .bessel import kv_ratio
from .container import (
    estimate_from_csv,
    estimate_to_csv,
    lead_field_from_csv,
    lead_field_to_csv,
    load_binary,
    measurement_from_csv,
    measurement_to_csv,
    save_binary,
    source_space_from_json,
    source_space_to_json,
)
from .forward import (
    GroundTruth,
    SimulationConfig,
    SphereHeadModel,
    build_sphere_leadfield,
    build_synthetic_leadfield,
    empirical_snr,
    fibonacci_directions,
    make_dual_grids,
    orientation_bases,
    simulate_measurement,
    sphere_surface_potential,
)
from .weighting import (
    Optimizer,
    PriorFamily,
    PriorSpec,
    SnrContext,
    beta_cg,
    beta_wcl,
    beta_wcgl,
    snr_from_data,
    theta_from_snr,
    weights_gaussian,
    weights_group_laplace,
    weights_laplace,
)
from .solvers import (
    RootSolver,
    SolveTrace,
    SolverConfig,
    gamma_update_cg,
    solve,
    solve_em_cg,
    solve_ias_cg,
    solve_mm_lqa,
    solve_wcgl,
    solve_wcl,
    solve_wmne,
)
from .evaluation import (
    DepthErrorTable,
    MassDistribution,
    RegressionResult,
    SummaryStats,
    depth_error_bins,
    depth_of_max,
    depth_regression,
    emd,
    emd_single_truth,
    summarize,
)
from .experiment import (
    ExperimentConfig,
    SolverSetting,
    load_results,
    run_experiment,
)
from .report import build_summary, write_report

__all__ = [
    "__version__",
    # errors
    "BesiError",
    "ConfigError",
    "DefiniteMatrixError",
    "DegenerateDataError",
    "GeometryError",
    "NumericalError",
    "UnsupportedModelError",
    # model
    "LeadField",
    "Measurement",
    "NoiseModel",
    "SourceEstimate",
    "SourceSpace",
    "residual_norm",
    "whiten",
    "kv_ratio",
    # serialization
    "estimate_from_csv",
    "estimate_to_csv",
    "lead_field_from_csv",
    "lead_field_to_csv",
    "load_binary",
    "measurement_from_csv",
    "measurement_to_csv",
    "save_binary",
    "source_space_from_json",
    "source_space_to_json",
    # forward simulation
    "GroundTruth",
    "SimulationConfig",
    "SphereHeadModel",
    "build_sphere_leadfield",
    "build_synthetic_leadfield",
    "empirical_snr",
    "fibonacci_directions",
    "make_dual_grids",
    "orientation_bases",
    "simulate_measurement",
    "sphere_surface_potential",
    # weighting
    "Optimizer",
    "PriorFamily",
    "PriorSpec",
    "SnrContext",
    "beta_cg",
    "beta_wcl",
    "beta_wcgl",
    "snr_from_data",
    "theta_from_snr",
    "weights_gaussian",
    "weights_group_laplace",
    "weights_laplace",
    # solvers
    "RootSolver",
    "SolveTrace",
    "SolverConfig",
    "gamma_update_cg",
    "solve",
    "solve_em_cg",
    "solve_ias_cg",
    "solve_mm_lqa",
    "solve_wcgl",
    "solve_wcl",
    "solve_wmne",
    # evaluation
    "DepthErrorTable",
    "MassDistribution",
    "RegressionResult",
    "SummaryStats",
    "depth_error_bins",
    "depth_of_max",
    "depth_regression",
    "emd",
    "emd_single_truth",
    "summarize",
    # experiment harness
    "ExperimentConfig",
    "SolverSetting",
    "load_results",
    "run_experiment",
    "build_summary",
    "write_report",
]
