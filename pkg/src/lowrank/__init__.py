"""Reduced-rank multivariate regression with Ky-Fan penalized rank selection.

The rank-r least-squares path comes from one SVD of the projected
response; the rank is then chosen by criteria whose penalties are built
from expected Ky-Fan norms of Gaussian random matrices, in both the
known- and unknown-noise-variance regimes.
"""

from .errors import (InfeasibleError, LowRankError, NumericalError,
                     VarianceNotEstimableError)
from .estimators import RankSelectingRegressor, ReducedRankRegressor
from .kyfan import (KyFanTable, kyfan_envelope, kyfan_marchenko_pastur,
                    kyfan_monte_carlo, kyfan_table, mp_density, mp_quantile,
                    mp_support)
from .regression import FitPath, Projector, fit_path, projector
from .selection import (CvResult, PenaltyTable, SelectionReport,
                        cross_validate_k, estimate_noise_variance,
                        max_selectable_rank, penalty_known_variance,
                        penalty_log, penalty_unknown_variance, select_among,
                        select_rank, select_rank_known_variance,
                        select_rank_rsc, select_rank_unknown_variance)
from .simulate import (EstimatorSpec, ExperimentConfig, ExperimentResult,
                       ratio_metric, run_experiment, sample_coefficients,
                       sample_design, sample_response)

__version__ = "0.1.0"

__all__ = [
    "FitPath",
    "Projector",
    "fit_path",
    "projector",
    "KyFanTable",
    "kyfan_monte_carlo",
    "kyfan_marchenko_pastur",
    "kyfan_envelope",
    "kyfan_table",
    "mp_density",
    "mp_quantile",
    "mp_support",
    "PenaltyTable",
    "SelectionReport",
    "CvResult",
    "penalty_known_variance",
    "penalty_unknown_variance",
    "penalty_log",
    "max_selectable_rank",
    "select_rank",
    "select_rank_known_variance",
    "select_rank_unknown_variance",
    "select_rank_rsc",
    "select_among",
    "estimate_noise_variance",
    "cross_validate_k",
    "ReducedRankRegressor",
    "RankSelectingRegressor",
    "EstimatorSpec",
    "ExperimentConfig",
    "ExperimentResult",
    "sample_design",
    "sample_coefficients",
    "sample_response",
    "ratio_metric",
    "run_experiment",
    "LowRankError",
    "InfeasibleError",
    "VarianceNotEstimableError",
    "NumericalError",
]
