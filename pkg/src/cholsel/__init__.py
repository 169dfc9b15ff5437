"""Bayesian selection of sparsity patterns in the Cholesky factor of a precision matrix."""

from .config import Hyperparameters, SearchConfig
from .experiments import metrics, ratio_experiment, selection_experiment, simulate
from .linalg import SampleStats, modified_cholesky, sample_covariance
from .pattern import CholeskyFactor, SparsityPattern, compare, pattern_of_factor, perturb_case
from .priors import check_hyperparameters, log_prior
from .scoring import ScoredPattern, log_posterior_ratio, total_score
from .search import exhaustive_mode, select_pattern, sss_refine, threshold_candidates

__version__ = "0.1.0"

__all__ = [
    "CholeskyFactor", "Hyperparameters", "SampleStats", "ScoredPattern", "SearchConfig",
    "SparsityPattern", "check_hyperparameters", "compare", "exhaustive_mode", "log_posterior_ratio",
    "log_prior", "metrics", "modified_cholesky", "pattern_of_factor", "perturb_case",
    "ratio_experiment", "sample_covariance", "select_pattern", "selection_experiment",
    "simulate", "sss_refine", "threshold_candidates", "total_score",
]
