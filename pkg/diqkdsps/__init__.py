from diqkdsps.photonic import (
    PhysicalParams,
    OverlapModel,
    MeasurementSettings,
    EventTable,
    Behavior,
    behavior,
    heralding_probability,
    enumerate_events,
    chs_moments,
    default_overlaps,
    overlaps_from_visibility,
    local_efficiency_params,
    transmission_efficiency,
    visibility_from_dephasing,
    cross_visibility,
    g2_to_p2,
    g2_from_p2,
)
from diqkdsps.analysis import chsh_score, correlator, is_nonlocal_2222, lp_local_membership, apply_preprocessing
from diqkdsps.entropy import RatePoint, binary_entropy, chsh_analytic_rate, chsh_preprocessing_rate
from diqkdsps.quadrature import QuadratureRule, gauss_radau
from diqkdsps.relaxation import MomentProblem, SolverReport, build_problem, solve, entropy_bound
from diqkdsps.sdpa import write_sdpa, read_sdpa, export_standard
from diqkdsps.optimizer import SettingsVector, OptimizerConfig, OptimizationResult, evaluate_rate, optimize_rate
from diqkdsps.sweep import sweep
from diqkdsps.finite_key import (
    FiniteKeyConfig,
    DistanceCurve,
    PenaltyTarget,
    eat_key_length,
    rate_per_second,
    distance_curve,
    scan_big_t,
    calibrate_penalty,
)
from diqkdsps.config import ExperimentConfig, load_config
from diqkdsps.exceptions import DiqkdError, ConfigError
from diqkdsps.enums import ErrorCode, RateMethod, SolverStatus

__all__ = [
    # Photonic model
    "PhysicalParams",
    "OverlapModel",
    "MeasurementSettings",
    "EventTable",
    "Behavior",
    "behavior",
    "heralding_probability",
    "enumerate_events",
    "chs_moments",
    "default_overlaps",
    "overlaps_from_visibility",
    "local_efficiency_params",
    "transmission_efficiency",
    "visibility_from_dephasing",
    "cross_visibility",
    "g2_to_p2",
    "g2_from_p2",

    # Behavior analysis
    "chsh_score",
    "correlator",
    "is_nonlocal_2222",
    "lp_local_membership",
    "apply_preprocessing",

    # Entropy bounds
    "RatePoint",
    "binary_entropy",
    "chsh_analytic_rate",
    "chsh_preprocessing_rate",
    "QuadratureRule",
    "gauss_radau",
    "MomentProblem",
    "SolverReport",
    "build_problem",
    "solve",
    "entropy_bound",
    "write_sdpa",
    "read_sdpa",
    "export_standard",

    # Optimization
    "SettingsVector",
    "OptimizerConfig",
    "OptimizationResult",
    "evaluate_rate",
    "optimize_rate",
    "sweep",

    # Finite key
    "FiniteKeyConfig",
    "DistanceCurve",
    "eat_key_length",
    "rate_per_second",
    "distance_curve",
    "PenaltyTarget",
    "scan_big_t",
    "calibrate_penalty",

    # Misc
    "ExperimentConfig",
    "load_config",
    "DiqkdError",
    "ConfigError",
    "ErrorCode",
    "RateMethod",
    "SolverStatus",
]
