"""Independent reference computations used to freeze expected values.

Nothing here calls the closed forms under test: column marginals are
computed from the regression form with the precision ``d`` integrated
numerically, and the beta-mixture prior by summing over a grid in ``q``.
"""

import math

import numpy as np
from scipy import integrate
from scipy.special import betaln, gammaln, logsumexp


def column_marginal(Y, j, support, tau_sq, lambda1, lambda2):
    """log of the integral over (L_{.j}, d_j) for column j, up to a factor shared by all patterns.

    y_j | L, d ~ N(-X L, d I) with ``L ~ N(0, d tau^2 I)`` and an inverse-gamma
    prior on ``d``; ``L`` is integrated in closed form by completing the
    square, ``d`` by adaptive quadrature on the log scale.
    """
    n = Y.shape[0]
    y = Y[:, j]
    X = Y[:, list(support)]
    m = len(support)
    if m:
        M = X.T @ X + np.eye(m) / tau_sq
        rss = y @ y - (y @ X) @ np.linalg.solve(M, X.T @ y)
        log_c = -0.5 * m * math.log(tau_sq) - 0.5 * np.linalg.slogdet(M)[1]
    else:
        rss = y @ y
        log_c = 0.0

    def log_f(u):
        d = math.exp(u)
        return (-(n / 2) * u - rss / (2 * d) + lambda1 * math.log(lambda2) - gammaln(lambda1)
                - (lambda1 + 1) * u - lambda2 / d + u)

    grid = np.linspace(-30, 30, 6001)
    shift = max(log_f(u) for u in grid)
    val, _ = integrate.quad(lambda u: math.exp(log_f(u) - shift), -40, 40, limit=500,
                            epsabs=0, epsrel=1e-12, points=[float(grid[np.argmax(
                                [log_f(u) for u in grid])])])
    return log_c + math.log(val) + shift


def beta_mixture_prior_grid(n_edges, n_positions, a, b, points=10_000):
    """log of the integral over q of q^K (1 - q)^(N - K) against Beta(a, b), midpoint grid."""
    q = (np.arange(points) + 0.5) / points
    log_density = (a - 1) * np.log(q) + (b - 1) * np.log1p(-q) - betaln(a, b)
    return float(logsumexp(n_edges * np.log(q) + (n_positions - n_edges) * np.log1p(-q)
                           + log_density) - math.log(points))


def multiplicative_mass_mc(pattern, alpha1, alpha2, draws=400_000, seed=0):
    """Monte Carlo estimate of pi(Z) under the multiplicative prior."""
    rng = np.random.default_rng(seed)
    w = rng.beta(alpha1, alpha2, size=(draws, pattern.p))
    log_terms = np.zeros(draws)
    for j in range(pattern.p - 1):
        for k in range(j + 1, pattern.p):
            prod = w[:, j] * w[:, k]
            log_terms += np.log(prod) if k in pattern.supports[j] else np.log1p(-prod)
    return float(np.exp(log_terms).mean())
