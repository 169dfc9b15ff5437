"""Log marginal posterior scores of sparsity patterns.

Integrating the Cholesky parameters out of the spike-and-slab model leaves,
for every column j with support Z_j,

    -(n/2 + lambda1) log(n S~_{j|Z_j} / 2 - 1 / (2 tau^2) + lambda2)
    - 1/2 log|S~[Z_j, Z_j]| - |Z_j| / 2 log(n tau^2)

and the total score is the sum of these terms plus the log prior of Z.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import Hyperparameters
from .linalg import VARIANCE_FLOOR, ConditioningError, SampleStats, column_quantities
from .pattern import SparsityPattern
from .priors import log_prior


class ContextMismatchError(ValueError):
    """Two scores from different (n, p, hyperparameter) contexts were combined."""


class ColumnScoreError(ArithmeticError):
    def __init__(self, column: int, cause: Exception):
        super().__init__(f"column {column}: {cause}")
        self.column = column


def likelihood_term(n: int, hyper: Hyperparameters, cond_var: float, logdet: float,
                    size: int) -> float:
    """Column term from its conditional variance, submatrix log-determinant and support size."""
    if cond_var < VARIANCE_FLOOR:
        raise ConditioningError(f"conditional variance {cond_var:.3e} below floor")
    bracket = n * cond_var / 2 - 1 / (2 * hyper.tau_sq) + hyper.lambda2
    if not bracket >= hyper.lambda2 / 2 or not bracket > 0:
        raise ConditioningError(
            f"likelihood bracket {bracket:.6g} fell below lambda2/2 = {hyper.lambda2 / 2:.3g}")
    return (-(n / 2 + hyper.lambda1) * math.log(bracket) - 0.5 * logdet
            - 0.5 * size * math.log(n * hyper.tau_sq))


def column_loglik(stats: SampleStats, j: int, support: Sequence[int],
                  hyper: Hyperparameters) -> float:
    """Column j's log marginal likelihood contribution; ``-inf`` above the support cap."""
    if len(support) > hyper.max_col_support:
        return -math.inf
    try:
        cond, logdet = column_quantities(stats, j, support)
        return likelihood_term(stats.n, hyper, cond, logdet, len(support))
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        raise ColumnScoreError(j, exc) from exc


@dataclass(frozen=True)
class ScoredPattern:
    """A pattern with its unnormalized log posterior and the pieces that make it up."""

    pattern: SparsityPattern
    total: float
    prior_term: float
    column_terms: tuple[float, ...]
    context: str = field(default="", compare=False)

    def ratio_to(self, other: "ScoredPattern") -> float:
        """log pi(self | Y) - log pi(other | Y); refuses scores from different contexts."""
        if self.context != other.context:
            raise ContextMismatchError(
                f"cannot compare scores from contexts {self.context!r} and {other.context!r}")
        return self.total - other.total

    def to_dict(self) -> dict:
        return {"edges": self.pattern.n_edges, "total": self.total,
                "prior": self.prior_term, "columns": list(self.column_terms)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def total_score(pattern: SparsityPattern, stats: SampleStats,
                hyper: Hyperparameters) -> ScoredPattern:
    if pattern.p != stats.p:
        raise ValueError(f"pattern has p={pattern.p} but statistics have p={stats.p}")
    columns = tuple(column_loglik(stats, j, pattern.supports[j], hyper)
                    for j in range(pattern.p - 1))
    prior = log_prior(pattern, hyper)
    return ScoredPattern(pattern=pattern, total=assemble(prior, columns), prior_term=prior,
                         column_terms=columns, context=hyper.fingerprint(stats.n, stats.p))


def assemble(prior: float, columns: Sequence[float]) -> float:
    """prior + sum(columns), summed in column order so every caller gets identical bits."""
    total = prior
    for term in columns:
        total += term
    return total


def log_posterior_ratio(pattern: SparsityPattern, reference: SparsityPattern,
                        stats: SampleStats, hyper: Hyperparameters) -> float:
    """log pi(pattern | Y) - log pi(reference | Y)."""
    return total_score(pattern, stats, hyper).ratio_to(total_score(reference, stats, hyper))
