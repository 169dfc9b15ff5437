"""Log prior masses of sparsity patterns.

Three pattern priors are supported:

* Erdos-Renyi: independent Bernoulli(q) edges, exact mass.
* Beta-mixture: Bernoulli(q) edges with q integrated against a beta prior;
  the mass depends on the pattern only through its edge count ``K`` and is
  returned without its shared normalizing constant.
* Multiplicative: edge (k, j) present with probability ``w_k * w_j`` and
  independent Beta(alpha1, alpha2) node weights.  The mass is a p-dimensional
  integral, approximated by Laplace's method on the logit scale.  A tensor
  Gauss-Jacobi rule gives a reference value for small p.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.special import betaln, logit, logsumexp, roots_jacobi

from .config import Hyperparameters
from .pattern import SparsityPattern


class LaplaceError(ArithmeticError):
    """The Laplace approximation could not produce a valid mode."""


# Erdos-Renyi and beta-mixture --------------------------------------------


def log_prior_erdos_renyi(pattern: SparsityPattern, q: float) -> float:
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    k = pattern.n_edges
    return k * math.log(q) + (pattern.n_positions - k) * math.log1p(-q)


def log_beta_mixture_mass(p: int, n_edges: int, alpha1: float, alpha2: float) -> float:
    """log B(alpha1 (p-1) + K, alpha2 (p-1) + p(p-1)/2 - K), shared constant dropped."""
    a = alpha1 * (p - 1) + n_edges
    b = alpha2 * (p - 1) + p * (p - 1) / 2 - n_edges
    if b <= 0:
        raise ValueError(f"second beta argument is {b} <= 0 (K={n_edges} too large for p={p})")
    return float(betaln(a, b))


def log_prior_beta_mixture(pattern: SparsityPattern, alpha1: float, alpha2: float) -> float:
    if not (alpha1 > 0 and alpha2 > 0):
        raise ValueError("alpha1 and alpha2 must be positive")
    return log_beta_mixture_mass(pattern.p, pattern.n_edges, alpha1, alpha2)


# multiplicative prior -------------------------------------------------------


def _absent_mask(pattern: SparsityPattern) -> np.ndarray:
    """Symmetric p x p mask of node pairs without an edge (diagonal excluded)."""
    present = pattern.to_mask()
    present = present | present.T
    absent = ~present
    np.fill_diagonal(absent, False)
    return absent


def multiplicative_log_integrand(pattern: SparsityPattern, omega: np.ndarray,
                                 alpha1: float, alpha2: float):
    """Log integrand ``h(w)`` of the multiplicative prior mass on the w scale.

    ``h(w) = sum_{j<k} [Z_kj (log w_j + log w_k) + (1 - Z_kj) log(1 - w_j w_k)]
    + sum_j [(alpha1 - 1) log w_j + (alpha2 - 1) log(1 - w_j)]``

    The beta normalizing constants are not included.

    Returns
    -------
    value : float
    grad : ndarray, shape (p,)
    hess : ndarray, shape (p, p)
    """
    w = np.asarray(omega, dtype=float)
    if w.shape != (pattern.p,):
        raise ValueError(f"omega must have length {pattern.p}")
    if np.any(w <= 0) or np.any(w >= 1):
        raise ValueError("omega must lie strictly inside (0, 1)")
    deg = pattern.degrees()
    A = _absent_mask(pattern)
    P = np.outer(w, w)
    one_minus = 1.0 - P
    iu = np.triu_indices(pattern.p, 1)

    value = (deg @ np.log(w)
             + np.log(one_minus[iu])[A[iu]].sum()
             + (alpha1 - 1) * np.log(w).sum() + (alpha2 - 1) * np.log1p(-w).sum())

    # d/dw_j log(1 - w_j w_k) = -w_k / (1 - w_j w_k)
    R = np.where(A, 1.0 / one_minus, 0.0)
    grad = deg / w - (R * w[None, :]).sum(axis=1) + (alpha1 - 1) / w - (alpha2 - 1) / (1 - w)

    R2 = R * R
    hess = -R2  # d2/dw_j dw_k log(1 - w_j w_k) = -1 / (1 - w_j w_k)^2
    diag = (-deg / w ** 2 - (R2 * (w ** 2)[None, :]).sum(axis=1)
            - (alpha1 - 1) / w ** 2 - (alpha2 - 1) / (1 - w) ** 2)
    np.fill_diagonal(hess, diag)
    return float(value), grad, hess


def _logit_objective(theta, deg, A, alpha1, alpha2):
    """Log integrand on the logit scale including the Jacobian, with derivatives.

    g(t) = sum_j [(alpha1 + deg_j) log w_j + alpha2 log(1 - w_j)]
           + sum_{j<k absent} log(1 - w_j w_k),   w = sigmoid(t)
    """
    log_w = -np.logaddexp(0.0, -theta)
    log_1mw = -np.logaddexp(0.0, theta)
    w = np.exp(log_w)
    v = np.exp(log_1mw)  # 1 - w without cancellation
    P = np.outer(w, w)
    one_minus = 1.0 - P
    U = np.where(A, P / one_minus, 0.0)
    a = alpha1 + deg

    value = (a @ log_w + alpha2 * log_1mw.sum()
             + 0.5 * np.where(A, np.log1p(-P), 0.0).sum())
    grad = a * v - alpha2 * w - v * U.sum(axis=1)

    V = U / np.where(A, one_minus, 1.0)
    hess = -np.outer(v, v) * V
    s = w * v
    diag = -(a + alpha2) * s + s * U.sum(axis=1) - v ** 2 * V.sum(axis=1)
    np.fill_diagonal(hess, diag)
    return float(value), grad, hess


@dataclass(frozen=True)
class LaplaceResult:
    log_value: float
    mode: np.ndarray
    newton_iters: int
    converged: bool
    hessian_logdet: float


def _newton_ascent(theta, deg, A, alpha1, alpha2, max_iter, tol):
    g, grad, hess = _logit_objective(theta, deg, A, alpha1, alpha2)
    for it in range(1, max_iter + 1):
        if np.max(np.abs(grad)) < tol:
            return theta, g, grad, hess, it - 1, True
        neg = -hess
        shift = 0.0
        while True:
            try:
                C = la.cho_factor(neg + shift * np.eye(len(theta)), lower=True)
                break
            except la.LinAlgError:
                shift = max(2 * shift, 1e-6 * max(1.0, np.abs(np.diag(neg)).max()))
        step = la.cho_solve(C, grad)
        t = 1.0
        while True:
            cand = theta + t * step
            g_new, grad_new, hess_new = _logit_objective(cand, deg, A, alpha1, alpha2)
            if g_new >= g - 1e-12 * abs(g) or t < 1e-10:
                break
            t *= 0.5
        if t < 1e-10 and g_new < g:
            return theta, g, grad, hess, it, False
        theta, g, grad, hess = cand, g_new, grad_new, hess_new
    return theta, g, grad, hess, max_iter, bool(np.max(np.abs(grad)) < tol)


def log_prior_multiplicative_laplace(pattern: SparsityPattern, alpha1: float, alpha2: float,
                                     max_iter: int = 200, tol: float = 1e-8) -> LaplaceResult:
    """Laplace approximation to log pi(Z) under the multiplicative prior.

    The mode is found by damped Newton on ``t = logit(w)``, where the
    Jacobian removes the boundary singularity that ``alpha1 < 1`` creates on
    the w scale.  The returned ``log_value`` is a normalized log mass (the
    ``p log B(alpha1, alpha2)`` constant is included).
    """
    if not (alpha1 > 0 and alpha2 > 0):
        raise ValueError("alpha1 and alpha2 must be positive")
    p = pattern.p
    deg = pattern.degrees().astype(float)
    A = _absent_mask(pattern)

    guess = (alpha1 + deg) / (alpha1 + alpha2 + p)
    starts = [logit(guess), np.zeros(p)]
    total_iters = 0
    for theta0 in starts:
        theta, g, grad, hess, iters, converged = _newton_ascent(
            theta0, deg, A, alpha1, alpha2, max_iter, tol)
        total_iters += iters
        if converged:
            break
    try:
        C = la.cholesky(-hess, lower=True)
    except la.LinAlgError as exc:
        raise LaplaceError("Hessian is not negative definite at the Newton end point") from exc
    logdet = float(2.0 * np.log(np.diag(C)).sum())
    log_value = g + 0.5 * p * math.log(2 * math.pi) - 0.5 * logdet - p * betaln(alpha1, alpha2)
    mode = 1.0 / (1.0 + np.exp(-theta))
    return LaplaceResult(log_value=float(log_value), mode=mode, newton_iters=total_iters,
                         converged=converged, hessian_logdet=logdet)


def _jacobi_rule(nodes: int, alpha1: float, alpha2: float):
    """Nodes on (0, 1) and log weights of the Beta(alpha1, alpha2) probability measure."""
    x, wts = roots_jacobi(nodes, alpha2 - 1.0, alpha1 - 1.0)
    omega = 0.5 * (1.0 + x)
    log_w = np.log(wts) - (alpha1 + alpha2 - 1.0) * math.log(2.0) - betaln(alpha1, alpha2)
    return omega, log_w


def _tensor_log_mass(pattern, nodes, alpha1, alpha2):
    p = pattern.p
    omega, log_w = _jacobi_rule(nodes, alpha1, alpha2)
    Z = pattern.to_mask()
    log_om = np.log(omega)
    tables = {True: log_om[:, None] + log_om[None, :],
              False: np.log1p(-np.outer(omega, omega))}

    # the first coordinate is looped over; the other p - 1 form a dense grid
    m = p - 1

    def along(vec, ax):
        shape = [1] * m
        shape[ax] = nodes
        return vec.reshape(shape)

    def across(mat, a, b):
        shape = [1] * m
        shape[a] = shape[b] = nodes
        return mat.reshape(shape)

    rest = np.zeros([nodes] * m)
    for a in range(m):
        rest = rest + along(log_w, a)
    for j, k in itertools.combinations(range(1, p), 2):
        rest = rest + across(tables[bool(Z[k, j])], j - 1, k - 1)

    partial = np.empty(nodes)
    for i0 in range(nodes):
        total = rest + log_w[i0]
        for k in range(1, p):
            total = total + along(tables[bool(Z[k, 0])][i0], k - 1)
        partial[i0] = logsumexp(total)
    return float(logsumexp(partial))


def log_prior_multiplicative_quadrature(pattern: SparsityPattern, alpha1: float, alpha2: float,
                                        nodes: int = 64, max_points: int = 2 ** 26) -> float:
    """Reference log pi(Z) under the multiplicative prior by tensor Gauss-Jacobi quadrature.

    The weight of each node is its Beta(alpha1, alpha2) density, so the
    remaining integrand is a polynomial of degree at most ``p - 1`` in each
    coordinate and the rule is exact once ``nodes >= ceil(p / 2)``.  The
    result is cross-checked against a second node count.
    """
    p = pattern.p
    if p > 6:
        raise ValueError(f"quadrature oracle supports p <= 6, got p={p}")
    if nodes < p:
        raise ValueError(f"need at least p={p} nodes, got {nodes}")
    if nodes ** p > max_points:
        raise ValueError(f"{nodes}^{p} grid points exceed the budget of {max_points}; "
                         "lower `nodes` or raise `max_points`")
    value = _tensor_log_mass(pattern, nodes, alpha1, alpha2)
    other = 2 * nodes if (2 * nodes) ** p <= max_points else max(p, nodes // 2)
    if other != nodes:
        check = _tensor_log_mass(pattern, other, alpha1, alpha2)
        if abs(math.expm1(check - value)) > 1e-6:
            raise ArithmeticError(
                f"quadrature not converged: {nodes} nodes -> {value}, {other} nodes -> {check}")
    return value


# dispatch -------------------------------------------------------------------


def log_prior(pattern: SparsityPattern, hyper: Hyperparameters) -> float:
    """Log prior term of ``pattern`` for ``hyper.prior_kind``.

    Patterns with a column support above ``hyper.max_col_support`` have zero
    mass and score ``-inf``.
    """
    if pattern.n_edges and pattern.column_sizes().max() > hyper.max_col_support:
        return -math.inf
    if hyper.prior_kind == "erdos-renyi":
        return log_prior_erdos_renyi(pattern, hyper.q)
    if hyper.prior_kind == "beta-mixture":
        return log_prior_beta_mixture(pattern, hyper.alpha1, hyper.alpha2)
    result = log_prior_multiplicative_laplace(pattern, hyper.alpha1, hyper.alpha2)
    if not result.converged:
        raise LaplaceError(f"Newton did not converge for a pattern with {pattern.n_edges} edges")
    return result.log_value


def prior_depends_only_on_edge_count(hyper: Hyperparameters) -> bool:
    return hyper.prior_kind in ("beta-mixture", "erdos-renyi")


# hyperparameter diagnostics -------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    check: str
    message: str

    def __str__(self) -> str:
        return f"WARN {self.check}: {self.message}"


def check_hyperparameters(hyper: Hyperparameters, p: int, n: int, d_estimate: int,
                          kappa: float = 2.0, factor: float = 10.0) -> list[Diagnostic]:
    """Flag hyperparameters that sit far from the rates the consistency theory assumes.

    Nothing here is fatal; rates are evaluated at the given finite (n, p, d),
    where "tends to zero" is read as "is below one".
    """
    out = []
    if n > 1:
        cap = n / math.log(n)
        if hyper.max_col_support > cap:
            out.append(Diagnostic("support-cap", f"max_col_support={hyper.max_col_support} exceeds "
                                        f"n/log n = {cap:.3g}"))
    d = max(int(d_estimate), 1)
    if p > 1:
        ratio = d / (hyper.tau_sq * math.log(p))
        if ratio >= 1:
            out.append(Diagnostic("tau-rate", f"d/(tau^2 log p) = {ratio:.3g} is not small; "
                                        "tau^2 should grow faster than d / log p"))
        if n > 1:
            spread = (math.sqrt(n / hyper.tau_sq)
                      / (p ** ((1 - 1 / kappa) * hyper.c / 2) * math.log(n)))
            if spread >= 1:
                out.append(Diagnostic("tau-rate", f"sqrt(n/tau^2) / (p^((1-1/kappa)c/2) log n) = "
                                            f"{spread:.3g} is not small (kappa={kappa})"))
    if hyper.prior_kind == "multiplicative":
        if hyper.c <= 2:
            out.append(Diagnostic("c-range", f"c={hyper.c:g} but the multiplicative prior theory "
                                        "needs c > 2 (c > 2 kappa)"))
        else:
            target = max(p ** hyper.c, d ** (2 * hyper.c / (hyper.c - 2)))
            if not target / factor <= hyper.alpha2 <= target * factor:
                out.append(Diagnostic("alpha2-rate", f"alpha2={hyper.alpha2:.4g} is more than {factor:g}x "
                                            f"away from max(p^c, d^(2c/(c-2))) = {target:.4g}"))
    elif hyper.prior_kind == "beta-mixture":
        target = p ** hyper.c
        if not target / factor <= hyper.alpha2 <= target * factor:
            out.append(Diagnostic("alpha2-rate", f"alpha2={hyper.alpha2:.4g} is more than {factor:g}x "
                                        f"away from p^c = {target:.4g}"))
    return out
