"""Sample statistics and the dense linear algebra used by the scores."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as la

from .pattern import CholeskyFactor

# floor applied to conditional variances before they reach a log
VARIANCE_FLOOR = 1e-300


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """A matrix (or submatrix) that must be positive definite is not."""


class ConditioningError(ArithmeticError):
    """A scoring quantity left its mathematically guaranteed range numerically."""


@dataclass(frozen=True)
class SampleStats:
    """Zero-mean sample covariance ``S`` and the augmented ``S + I / (n tau^2)``."""

    n: int
    p: int
    tau_sq: float
    S: np.ndarray
    S_tilde: np.ndarray

    @classmethod
    def from_covariance(cls, S: np.ndarray, n: int, tau_sq: float) -> "SampleStats":
        S = np.array(S, dtype=float)
        p = S.shape[0]
        if S.shape != (p, p):
            raise ValueError(f"covariance must be square, got shape {S.shape}")
        if p < 2:
            raise ValueError("need p >= 2")
        if n < 1:
            raise ValueError(f"need n >= 1, got {n}")
        if tau_sq <= 0:
            raise ValueError(f"tau_sq must be positive, got {tau_sq}")
        if not np.all(np.isfinite(S)):
            raise ValueError("covariance has non-finite entries")
        scale = max(np.abs(S).max(), 1.0)
        if np.abs(S - S.T).max() > 1e-12 * scale:
            raise ValueError("covariance is not symmetric")
        S = 0.5 * (S + S.T)
        S_tilde = S + np.eye(p) / (n * tau_sq)
        S.setflags(write=False)
        S_tilde.setflags(write=False)
        return cls(n=int(n), p=p, tau_sq=float(tau_sq), S=S, S_tilde=S_tilde)

    def conditional_variance(self, j: int, support: Sequence[int]) -> float:
        return conditional_variance(self, j, support)

    def logdet_submatrix(self, support: Sequence[int]) -> float:
        return logdet_submatrix(self, support)


def sample_covariance(Y: np.ndarray, tau_sq: float) -> SampleStats:
    """Sample covariance ``Y^T Y / n`` (the mean is fixed at zero)."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ValueError(f"data must be an n x p matrix, got shape {Y.shape}")
    if not np.all(np.isfinite(Y)):
        raise ValueError("data contains non-finite values")
    n = Y.shape[0]
    return SampleStats.from_covariance(Y.T @ Y / n, n, tau_sq)


def _cholesky(A: np.ndarray, what: str) -> np.ndarray:
    try:
        return la.cholesky(A, lower=True, check_finite=False)
    except la.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"{what} is not positive definite") from exc


def conditional_variance(stats: SampleStats, j: int, support: Sequence[int]) -> float:
    """Schur complement of ``S_tilde[Z, Z]`` in the block indexed by ``{j} + Z``.

    For an empty support this is ``S_tilde[j, j]``.
    """
    St = stats.S_tilde
    idx = np.asarray(support, dtype=int)
    if idx.size == 0:
        return float(St[j, j])
    C = _cholesky(St[np.ix_(idx, idx)], f"submatrix for column {j}")
    w = la.solve_triangular(C, St[idx, j], lower=True, check_finite=False)
    value = float(St[j, j] - w @ w)
    if not value > 0:
        raise ConditioningError(
            f"conditional variance for column {j} is not positive ({value:.3e})")
    return value


def logdet_submatrix(stats: SampleStats, support: Sequence[int]) -> float:
    idx = np.asarray(support, dtype=int)
    if idx.size == 0:
        return 0.0
    C = _cholesky(stats.S_tilde[np.ix_(idx, idx)], f"submatrix {list(idx)}")
    return float(2.0 * np.log(np.diag(C)).sum())


def column_quantities(stats: SampleStats, j: int, support: Sequence[int]) -> tuple[float, float]:
    """``(conditional_variance, logdet_submatrix)`` from one factorization.

    Uses the Cholesky factor of the ``(1 + |Z|)`` block ordered ``(Z, j)``: its
    leading block gives the log determinant and its last pivot squared is the
    Schur complement.
    """
    St = stats.S_tilde
    idx = np.append(np.asarray(support, dtype=int), j)
    if idx.size == 1:
        return float(St[j, j]), 0.0
    try:
        C = la.cholesky(St[np.ix_(idx, idx)], lower=True, check_finite=False)
    except la.LinAlgError as exc:
        raise NotPositiveDefiniteError(
            f"augmented covariance block for column {j} is not positive definite") from exc
    diag = np.diag(C)
    cond = float(diag[-1] ** 2)
    if not cond > 0:
        raise ConditioningError(f"conditional variance for column {j} is not positive")
    return cond, float(2.0 * np.log(diag[:-1]).sum())


def modified_cholesky(W: np.ndarray) -> CholeskyFactor:
    """Factor a symmetric positive definite ``W`` as ``L D^-1 L^T``.

    ``L`` is unit lower triangular.  With the usual ``W = L Delta L^T`` this
    returns ``D = Delta^-1``.
    """
    W = np.asarray(W, dtype=float)
    C = _cholesky(W, "matrix")
    pivots = np.diag(C)
    L = C / pivots
    np.fill_diagonal(L, 1.0)
    return CholeskyFactor(np.tril(L), 1.0 / pivots ** 2)


def reconstruct(factor: CholeskyFactor) -> np.ndarray:
    """Return ``L D^-1 L^T``."""
    return factor.precision()


def sample_gaussian(factor: CholeskyFactor, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n rows from N(0, (L L^T)^-1) by solving ``L^T y = eps``.

    The factor must have ``D = I``.
    """
    if not np.array_equal(factor.d, np.ones(factor.p)):
        raise ValueError("sample_gaussian expects a factor with D = I")
    eps = rng.standard_normal((factor.p, n))
    Y = la.solve_triangular(factor.L, eps, trans="T", lower=True, unit_diagonal=True)
    return np.ascontiguousarray(Y.T)


def read_data(path) -> np.ndarray:
    """Read an n x p CSV; a leading non-numeric header row is skipped."""
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(x) for x in first.split(",")]
        skip = 0
    except ValueError:
        skip = 1
    Y = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float, skiprows=skip)
    if not np.all(np.isfinite(Y)):
        raise ValueError(f"{path}: data contains non-finite values")
    return Y


def write_data(Y: np.ndarray, path) -> None:
    """CSV with header ``y1,...,yp`` and 17 significant digits."""
    header = ",".join(f"y{i + 1}" for i in range(Y.shape[1]))
    np.savetxt(path, Y, delimiter=",", fmt="%.17g", header=header, comments="")
