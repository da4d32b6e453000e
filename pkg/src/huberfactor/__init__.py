"""Robust factor analysis for large, heavy-tailed panels.

Estimators: conventional PCA, weighted-PCA with robust time-point
weights, and alternating element-wise Huber regressions.  Companion
tools cover factor-number selection, synthetic panel generation, Monte
Carlo evaluation, and a minimum-variance portfolio backtest.
"""

from .errors import (
    DataError,
    DefinitenessError,
    DegeneracyError,
    DimensionError,
    FactorError,
    ParameterError,
)
from .estimators import (
    HpcaConfig,
    IhrConfig,
    WeightVector,
    eval_objectives,
    fit_hpca,
    fit_ihr,
    fit_pca,
    hpca_weights,
    save_fit,
)
from .huber import (
    HuberConfig,
    HuberRegression,
    huber_loss,
    huber_psi,
    huber_regress,
    huber_weight,
    mad_scale,
)
from .metrics import (
    McReport,
    normality_probe,
    replication_errors,
    run_monte_carlo,
    subspace_distance,
)
from .panel import (
    EigenPair,
    FactorFit,
    Panel,
    SignMatrix,
    normalize_fit,
    second_moment,
    sign_align,
    top_eigen,
)
from .portfolio import (
    BacktestConfig,
    BacktestReport,
    PerfStats,
    factor_covariance,
    hard_threshold,
    min_variance_weights,
    performance_stats,
    rolling_backtest,
)
from .rank import (
    RankEstimate,
    default_threshold,
    estimate_rank_er,
    estimate_rank_rm,
    rank_from_diag,
)
from .simulate import (
    GroundTruth,
    SimConfig,
    gen_alpha_stable,
    gen_mvt,
    gen_scenario,
    gen_skew_t,
    scenario_config,
)

__version__ = "0.1.0"

__all__ = [
    "FactorError",
    "ParameterError",
    "DimensionError",
    "DataError",
    "DegeneracyError",
    "DefinitenessError",
    "Panel",
    "FactorFit",
    "SignMatrix",
    "EigenPair",
    "second_moment",
    "top_eigen",
    "normalize_fit",
    "sign_align",
    "HuberConfig",
    "HuberRegression",
    "huber_loss",
    "huber_psi",
    "huber_weight",
    "huber_regress",
    "mad_scale",
    "HpcaConfig",
    "IhrConfig",
    "WeightVector",
    "fit_pca",
    "fit_hpca",
    "fit_ihr",
    "hpca_weights",
    "eval_objectives",
    "save_fit",
    "RankEstimate",
    "default_threshold",
    "rank_from_diag",
    "estimate_rank_rm",
    "estimate_rank_er",
    "SimConfig",
    "GroundTruth",
    "gen_alpha_stable",
    "gen_mvt",
    "gen_skew_t",
    "gen_scenario",
    "scenario_config",
    "McReport",
    "subspace_distance",
    "replication_errors",
    "run_monte_carlo",
    "normality_probe",
    "BacktestConfig",
    "BacktestReport",
    "PerfStats",
    "hard_threshold",
    "factor_covariance",
    "min_variance_weights",
    "performance_stats",
    "rolling_backtest",
]
