"""Entropy-penalized Markowitz portfolio optimization toolkit.

Per-asset return distributions contribute a Shannon-entropy penalty to
the covariance quadratic form; a temperature weighs the penalty and can
be calibrated so a reference market portfolio's quality ratio equals 1.
Ships estimators, a closed-form constrained solver, rolling-window
backtests, a synthetic market generator, a CLI, and an HTTP service.
"""

__version__ = "0.1.0"

from .backtest import (
    BacktestReport,
    StrategyResult,
    SweepTable,
    annualize,
    run_backtest,
    sweep_alpha,
    sweep_mc,
)
from .config import (
    AlphaConfig,
    BacktestConfig,
    EstimatorConfig,
    ObvConfig,
    OptimizerConfig,
    RunConfig,
    config_from_dict,
    config_to_dict,
    load_config,
)
from .errors import (
    DegenerateObjective,
    DegenerateSample,
    DomainError,
    EntroportError,
    IllConditioned,
    InfeasibleConstraints,
    InsufficientData,
    InvalidConfig,
    MalformedInput,
    NoConvergence,
    NotPositiveDefinite,
    OutOfSupport,
    SingularMatrix,
    ZeroEntropyQuadratic,
    ZeroRisk,
)
from .estimators import (
    GAUSSIAN_UNIT_ENTROPY,
    AssetStats,
    HistogramPdf,
    entropy_of,
    estimate_stats,
    gaussian_entropy,
    histogram,
    student_t_entropy,
)
from .market_data import (
    PriceTable,
    ReturnSeries,
    SyntheticSpec,
    generate_synthetic,
    parse_prices,
    prices_from_returns,
    serialize_prices,
    synthetic_spec_from_dict,
    synthetic_spec_to_dict,
    to_returns,
)
from .objective_value import ObjectiveView, build_view, objective_values
from .optimizer import (
    AlphaSolveReport,
    OptimizerProblem,
    Portfolio,
    augmented_covariance,
    inverse_variance_weights,
    min_variance_weights,
    portfolio_risk,
    quality_ratio,
    solve_alpha,
    solve_weights,
    weight_concentration,
)

__all__ = [
    "__version__",
    "AlphaConfig",
    "AlphaSolveReport",
    "AssetStats",
    "BacktestConfig",
    "BacktestReport",
    "DegenerateObjective",
    "DegenerateSample",
    "DomainError",
    "EntroportError",
    "EstimatorConfig",
    "GAUSSIAN_UNIT_ENTROPY",
    "HistogramPdf",
    "IllConditioned",
    "InfeasibleConstraints",
    "InsufficientData",
    "InvalidConfig",
    "MalformedInput",
    "NoConvergence",
    "NotPositiveDefinite",
    "ObjectiveView",
    "ObvConfig",
    "OptimizerConfig",
    "OptimizerProblem",
    "OutOfSupport",
    "Portfolio",
    "PriceTable",
    "ReturnSeries",
    "RunConfig",
    "SingularMatrix",
    "StrategyResult",
    "SweepTable",
    "SyntheticSpec",
    "ZeroEntropyQuadratic",
    "ZeroRisk",
    "annualize",
    "augmented_covariance",
    "build_view",
    "config_from_dict",
    "config_to_dict",
    "entropy_of",
    "estimate_stats",
    "gaussian_entropy",
    "generate_synthetic",
    "histogram",
    "inverse_variance_weights",
    "load_config",
    "min_variance_weights",
    "objective_values",
    "parse_prices",
    "portfolio_risk",
    "prices_from_returns",
    "quality_ratio",
    "run_backtest",
    "serialize_prices",
    "solve_alpha",
    "solve_weights",
    "student_t_entropy",
    "sweep_alpha",
    "sweep_mc",
    "synthetic_spec_from_dict",
    "synthetic_spec_to_dict",
    "to_returns",
    "weight_concentration",
]
