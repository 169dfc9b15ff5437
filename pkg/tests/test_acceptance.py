"""Acceptance criteria 1-8, each run at its stated tolerance.

Every test records one PASS/FAIL line, printed again in the pytest terminal
summary under "acceptance criteria".
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.special import logsumexp

from cholsel.config import Hyperparameters, SearchConfig
from cholsel.experiments import metrics, ratio_experiment, selection_experiment, simulate, summarize
from cholsel.linalg import SampleStats, conditional_variance, logdet_submatrix, sample_covariance
from cholsel.pattern import ConfusionCounts, SparsityPattern, all_patterns
from cholsel.priors import (
    _absent_mask,
    _logit_objective,
    log_prior_multiplicative_laplace,
    log_prior_multiplicative_quadrature,
    multiplicative_log_integrand,
)
from cholsel.search import exhaustive_mode, sss_refine
from cholsel.scoring import total_score

from _oracles import beta_mixture_prior_grid, column_marginal


def test_criterion_1_posterior_ratio_consistency(acceptance):
    p_list = (150, 300, 450)
    start = time.perf_counter()
    rows = ratio_experiment(p_list, sparsity=0.03, reps=20, seed=0)
    elapsed = time.perf_counter() - start
    failures = []
    for prior in ("beta-mixture", "multiplicative"):
        for case in (1, 2, 3, 4):
            sel = [r for r in rows if r.prior == prior and r.case == case]
            frac = np.mean([r.log_ratio < 0 for r in sel])
            medians = [abs(float(np.median([r.log_ratio for r in sel if r.p == p])))
                       for p in p_list]
            monotone = all(b >= a for a, b in zip(medians, medians[1:]))
            print(f"  {prior:15s} case {case}: negative {frac:.3f}, |median| by p {medians}")
            if frac < 0.95:
                failures.append(f"{prior} case {case} negative in {frac:.0%}")
            if not monotone:
                failures.append(f"{prior} case {case} |median| not non-decreasing")
    ok = not failures and elapsed < 300
    detail = f"{elapsed:.0f}s; " + ("all cases >= 95% negative, medians monotone" if not failures
                                   else "; ".join(failures))
    acceptance(1, ok, detail)
    assert ok, detail


def test_criterion_2_selection_quality(acceptance):
    start = time.perf_counter()
    rows = selection_experiment([300], sparsity=0.03, cfg=SearchConfig(seed=0),
                                prior="beta-mixture", reps=5, seed=0, n=100)
    elapsed = time.perf_counter() - start
    s = summarize(rows)[300]
    for r in rows:
        print(f"  rep {r.rep}: edges {r.edges}, ppv {r.ppv:.3f}, tpr {r.tpr:.3f}, mcc {r.mcc:.3f}")
    ok = s["mcc"] >= 0.6 and s["tpr"] >= 0.7 and elapsed < 900
    detail = (f"mean MCC {s['mcc']:.3f} (need >= 0.6), mean TPR {s['tpr']:.3f} (need >= 0.7), "
              f"PPV {s['ppv']:.3f}, {elapsed:.0f}s")
    acceptance(2, ok, detail)
    assert ok, detail


def test_criterion_3_beta_mixture_oracle(acceptance):
    p, n = 3, 20
    _, _, Y = simulate(p, n, 0.34, seed=3)
    hyper = Hyperparameters(tau_sq=2.0, lambda1=0.5, lambda2=0.7, alpha1=1.3, alpha2=2.1,
                            max_col_support=5)
    stats = sample_covariance(Y, hyper.tau_sq)
    patterns = list(all_patterns(p))
    closed = np.array([total_score(Z, stats, hyper).total for Z in patterns])
    a, b = hyper.alpha1 * (p - 1), hyper.alpha2 * (p - 1)
    oracle = np.array([
        beta_mixture_prior_grid(Z.n_edges, 3, a, b, points=10_000)
        + sum(column_marginal(Y, j, Z.supports[j], hyper.tau_sq, hyper.lambda1, hyper.lambda2)
              for j in range(p - 1))
        for Z in patterns])
    post_closed = np.exp(closed - logsumexp(closed))
    post_oracle = np.exp(oracle - logsumexp(oracle))
    worst = float(np.max(np.abs(post_closed / post_oracle - 1)))
    ok = worst <= 1e-4
    detail = f"max relative posterior error {worst:.2e} over 8 patterns (need <= 1e-4)"
    acceptance(3, ok, detail)
    assert ok, detail


def _fd(f, x, h=1e-6):
    out = []
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        out.append((f(x + e) - f(x - e)) / (2 * h))
    return np.array(out)


def test_criterion_4_multiplicative_oracles(acceptance):
    failures = []
    q_full = log_prior_multiplicative_quadrature(SparsityPattern.full(2), 1.0, 1.0)
    q_empty = log_prior_multiplicative_quadrature(SparsityPattern.empty(2), 1.0, 1.0)
    p2_err = max(abs(q_full - math.log(0.25)), abs(q_empty - math.log(0.75)))
    if p2_err > 1e-6:
        failures.append(f"p=2 error {p2_err:.2e}")
    mass = sum(math.exp(log_prior_multiplicative_quadrature(Z, 1.0, 1.0, nodes=16))
               for Z in all_patterns(3))
    if abs(mass - 1) > 1e-5:
        failures.append(f"p=3 total mass {mass}")

    rng = np.random.default_rng(0)
    grad_err = hess_err = 0.0
    for Z in all_patterns(4):
        w = rng.uniform(0.1, 0.9, size=4)
        a1, a2 = 0.05 + 2 * rng.random(), 0.5 + 10 * rng.random()
        for fn, x in ((lambda x: multiplicative_log_integrand(Z, x, a1, a2), w),
                      (lambda t: _logit_objective(t, Z.degrees().astype(float), _absent_mask(Z),
                                                  a1, a2), np.log(w / (1 - w)))):
            _, g, H = fn(x)
            grad_err = max(grad_err, float(np.max(np.abs(g - _fd(lambda y: fn(y)[0], x)))
                                            / max(1.0, np.max(np.abs(g)))))
            fd_h = np.array([_fd(lambda y: fn(y)[1][i], x) for i in range(len(x))])
            hess_err = max(hess_err, float(np.max(np.abs(H - fd_h)) / max(1.0, np.max(np.abs(H)))))
    if grad_err > 1e-6:
        failures.append(f"gradient FD error {grad_err:.1e}")
    if hess_err > 1e-5:
        failures.append(f"Hessian FD error {hess_err:.1e}")

    print("  Laplace vs quadrature, p=3, alpha1 = alpha2 = 1:")
    errors = []
    for Z in all_patterns(3):
        lap = log_prior_multiplicative_laplace(Z, 1.0, 1.0).log_value
        quad = log_prior_multiplicative_quadrature(Z, 1.0, 1.0, nodes=16)
        errors.append(abs(lap - quad))
        print(f"    edges {sorted(Z.edges())}: laplace {lap:.6f} quadrature {quad:.6f} "
              f"abs error {abs(lap - quad):.4f}")
    ok = not failures
    detail = (f"p=2 error {p2_err:.1e}, p=3 mass {mass:.12f}, FD grad {grad_err:.1e} / "
              f"Hessian {hess_err:.1e}; Laplace abs log error max {max(errors):.3f} (reported)")
    if failures:
        detail += "; " + "; ".join(failures)
    acceptance(4, ok, detail)
    assert ok, detail


def test_criterion_5_determinant_identity(acceptance):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for trial in range(100):
        p = int(rng.integers(2, 51))
        A = rng.normal(size=(p, p))
        stats = SampleStats.from_covariance(A @ A.T / p, n=int(rng.integers(p, 5 * p)),
                                            tau_sq=float(rng.uniform(0.5, 5)))
        j = int(rng.integers(0, p - 1))
        rows = np.arange(j + 1, p)
        support = sorted(rng.choice(rows, size=int(rng.integers(0, rows.size + 1)), replace=False))
        lhs = logdet_submatrix(stats, [j] + support)
        rhs = logdet_submatrix(stats, support) + math.log(conditional_variance(stats, j, support))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
    ok = worst <= 1e-8
    detail = f"max relative error {worst:.2e} over 100 random matrices, p <= 50 (need <= 1e-8)"
    acceptance(5, ok, detail)
    assert ok, detail


def test_criterion_6_exhaustive_equivalence(acceptance):
    matches = exceed = 0
    for i in range(50):
        _, _, Y = simulate(5, 200, 0.3, seed=1000 + i)
        hyper = Hyperparameters.experiment_defaults(200, 5)
        stats = sample_covariance(Y, hyper.tau_sq)
        mode = exhaustive_mode(stats, hyper)
        found = sss_refine([SparsityPattern.empty(5)], stats, hyper, SearchConfig(seed=i)).best
        tol = 1e-9 * max(1.0, abs(mode.total))
        matches += abs(found.total - mode.total) <= tol
        exceed += found.total > mode.total + tol
    ok = matches >= 45 and exceed == 0
    detail = f"SSS from empty matched the exhaustive mode in {matches}/50, exceeded it {exceed} times"
    acceptance(6, ok, detail)
    assert ok, detail


def test_criterion_7_metrics_examples(acceptance):
    perfect = metrics(ConfusionCounts(tp=5, fp=0, fn=0, tn=5))
    inversion = metrics(ConfusionCounts(tp=0, fp=3, fn=4, tn=0))
    mixed = metrics(ConfusionCounts(tp=3, fp=1, fn=2, tn=4))
    checks = {
        "perfect 1/1/1": (perfect.ppv, perfect.tpr, perfect.mcc) == (1.0, 1.0, 1.0),
        "inversion mcc -1": inversion.mcc == -1.0,
        "ppv 0.75": mixed.ppv == 0.75,
        "tpr 0.6": mixed.tpr == 0.6,
        "mcc 10/sqrt(750)": abs(mixed.mcc - 10 / math.sqrt(750)) < 5e-5,
    }
    failed = [k for k, v in checks.items() if not v]
    ok = not failed
    detail = "all examples exact" if ok else (
        f"failed {failed}; mcc for TP=3,FP=1,FN=2,TN=4 is {mixed.mcc:.4f} = 10/sqrt(600)")
    acceptance(7, ok, detail)
    assert ok, detail


def _cli(args, workdir, threads):
    env = dict(os.environ, OMP_NUM_THREADS=str(threads), OPENBLAS_NUM_THREADS=str(threads),
               MKL_NUM_THREADS=str(threads))
    subprocess.run([sys.executable, "-m", "cholsel.cli", *args], cwd=workdir, env=env, check=True,
                   stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)


def test_criterion_8_determinism(acceptance, tmp_path):
    commands = {
        "simulate": ["simulate", "--p", "20", "--n", "60", "--sparsity", "0.1", "--seed", "7",
                     "--out", "data.csv"],
        "score": ["score", "--data", "data.csv", "--pattern", "data.csv.pattern", "--out", "out.csv"],
        "ratio-experiment": ["ratio-experiment", "--p-list", "30,45", "--reps", "3", "--seed", "7",
                             "--out", "out.csv"],
        "select": ["select", "--data", "data.csv", "--seed", "7", "--sss-iters", "50",
                   "--out", "out.csv"],
        "select (simulated)": ["select", "--p-list", "24,30", "--n", "40", "--reps", "2",
                               "--sparsity", "0.05", "--seed", "7", "--sss-iters", "20",
                               "--out", "out.csv"],
        "metrics": ["metrics", "--estimate", "data.csv.pattern", "--truth", "data.csv.pattern",
                    "--out", "out.csv"],
        "check-hyper": ["check-hyper", "--p", "300", "--n", "100", "--prior", "multiplicative",
                        "--out", "out.csv"],
        "laplace-diag": ["laplace-diag", "--p", "3", "--out", "out.csv"],
    }
    differing = []
    outputs = {}
    for run, (jobs, threads) in enumerate([(1, 1), (1, 1), (2, 2), (3, 1)]):
        workdir = tmp_path / f"run{run}"
        workdir.mkdir()
        for name, args in commands.items():
            extra = ["--jobs", str(jobs)]
            _cli(args + extra, workdir, threads)
            files = ["data.csv", "data.csv.pattern"] if name == "simulate" else ["out.csv"]
            blob = b"".join((workdir / f).read_bytes() for f in files)
            if name in outputs and outputs[name] != blob:
                differing.append(f"{name} (run {run})")
            outputs.setdefault(name, blob)
            if name != "simulate":
                (workdir / "out.csv").unlink()
    ok = not differing
    detail = (f"{len(commands)} commands x 4 runs (jobs 1/1/2/3, BLAS threads 1/1/2/1) "
              + ("byte-identical" if ok else f"differ: {differing}"))
    acceptance(8, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
