import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import betaln, logsumexp

from cholsel.config import Hyperparameters
from cholsel.experiments import simulate
from cholsel.linalg import ConditioningError, SampleStats, sample_covariance
from cholsel.pattern import SparsityPattern, all_patterns
from cholsel.scoring import (
    ColumnScoreError,
    ContextMismatchError,
    column_loglik,
    likelihood_term,
    log_posterior_ratio,
    total_score,
)

from _oracles import beta_mixture_prior_grid, column_marginal


def test_likelihood_term_example():
    # n=100, S~_jj=1, tau^2=100, lambdas 0.05, empty support
    hyper = Hyperparameters(tau_sq=100.0)
    value = likelihood_term(100, hyper, 1.0, 0.0, 0)
    assert value == pytest.approx(-50.05 * math.log(50 - 0.005 + 0.05), rel=1e-12)


def test_likelihood_term_guard():
    hyper = Hyperparameters(tau_sq=0.01, lambda2=0.05)
    with pytest.raises(ConditioningError):
        likelihood_term(10, hyper, 1.0, 0.0, 0)


def test_column_over_cap_is_minus_inf():
    stats = SampleStats.from_covariance(np.eye(4), n=10, tau_sq=1.0)
    hyper = Hyperparameters(tau_sq=1.0, max_col_support=1)
    assert column_loglik(stats, 0, (1, 2), hyper) == -math.inf


def test_column_error_carries_index():
    S = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 2.0], [0.0, 2.0, 1.0]])
    stats = SampleStats.from_covariance(S, n=10, tau_sq=1e300)
    with pytest.raises(ColumnScoreError) as info:
        column_loglik(stats, 0, (1, 2), Hyperparameters(tau_sq=1e300))
    assert info.value.column == 0


def test_empty_pattern_total_p3():
    rng = np.random.default_rng(4)
    Y = rng.normal(size=(15, 3))
    hyper = Hyperparameters(tau_sq=3.0, alpha1=0.4, alpha2=1.5, lambda1=0.2, lambda2=0.3)
    stats = sample_covariance(Y, hyper.tau_sq)
    n, St = 15, stats.S_tilde
    expected = betaln(2 * 0.4, 2 * 1.5 + 3) + sum(
        -(n / 2 + 0.2) * math.log(n * St[j, j] / 2 - 1 / (2 * 3.0) + 0.3) for j in range(2))
    assert total_score(SparsityPattern.empty(3), stats, hyper).total == pytest.approx(expected)


def test_score_parts_add_up():
    _, truth, Y = simulate(8, 30, 0.2, seed=2)
    hyper = Hyperparameters.experiment_defaults(30, 8)
    s = total_score(truth, sample_covariance(Y, hyper.tau_sq), hyper)
    assert s.total == pytest.approx(s.prior_term + sum(s.column_terms))
    assert set(s.to_dict()) == {"edges", "total", "prior", "columns"}


def test_ratio_antisymmetric_and_self_zero():
    _, truth, Y = simulate(10, 40, 0.15, seed=7)
    hyper = Hyperparameters.experiment_defaults(40, 10)
    stats = sample_covariance(Y, hyper.tau_sq)
    other = SparsityPattern.empty(10)
    assert log_posterior_ratio(truth, truth, stats, hyper) == 0.0
    assert log_posterior_ratio(other, truth, stats, hyper) == pytest.approx(
        -log_posterior_ratio(truth, other, stats, hyper))


def test_context_mismatch():
    _, truth, Y = simulate(6, 20, 0.2, seed=1)
    h1 = Hyperparameters.experiment_defaults(20, 6)
    h2 = h1.with_(lambda1=0.5)
    stats = sample_covariance(Y, h1.tau_sq)
    a, b = total_score(truth, stats, h1), total_score(truth, stats, h2)
    with pytest.raises(ContextMismatchError):
        a.ratio_to(b)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 3))
def test_column_locality(seed, col):
    # changing one column's support changes only that column's term
    rng = np.random.default_rng(seed)
    p = 5
    Y = rng.normal(size=(25, p))
    hyper = Hyperparameters(tau_sq=25.0, alpha2=5.0)
    stats = sample_covariance(Y, hyper.tau_sq)
    rows = list(range(col + 1, p))
    a = SparsityPattern.empty(p)
    b = a.with_column(col, rng.choice(rows, size=rng.integers(1, len(rows) + 1), replace=False))
    sa, sb = total_score(a, stats, hyper), total_score(b, stats, hyper)
    for j in range(p - 1):
        if j != col:
            assert sa.column_terms[j] == sb.column_terms[j]


def test_posterior_matches_independent_oracle():
    """Normalized posterior over all 8 patterns at p=3, n=20 against the numerical oracle."""
    p, n = 3, 20
    _, _, Y = simulate(p, n, 0.34, seed=3)
    hyper = Hyperparameters(tau_sq=2.0, lambda1=0.5, lambda2=0.7, alpha1=1.3, alpha2=2.1,
                            max_col_support=5)
    stats = sample_covariance(Y, hyper.tau_sq)
    patterns = list(all_patterns(p))
    closed = np.array([total_score(Z, stats, hyper).total for Z in patterns])
    a, b = hyper.alpha1 * (p - 1), hyper.alpha2 * (p - 1)
    oracle = np.array([
        beta_mixture_prior_grid(Z.n_edges, 3, a, b)
        + sum(column_marginal(Y, j, Z.supports[j], hyper.tau_sq, hyper.lambda1, hyper.lambda2)
              for j in range(p - 1))
        for Z in patterns])
    post_closed = np.exp(closed - logsumexp(closed))
    post_oracle = np.exp(oracle - logsumexp(oracle))
    np.testing.assert_allclose(post_closed, post_oracle, rtol=1e-4)
