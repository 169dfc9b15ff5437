"""Simulation studies: ground truth, posterior-ratio runs, selection runs and metrics."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import Hyperparameters, SearchConfig
from .linalg import sample_covariance, sample_gaussian
from .pattern import CholeskyFactor, ConfusionCounts, compare, pattern_of_factor, perturb_case
from .scoring import log_posterior_ratio
from .search import select_pattern


@dataclass(frozen=True)
class TruthSpec:
    p: int
    sparsity: float
    signal: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.sparsity < 1:
            raise ValueError(f"sparsity must lie in (0, 1), got {self.sparsity}")
        if self.signal == 0:
            raise ValueError("signal must be nonzero")

    @property
    def n_edges(self) -> int:
        # round half up
        return int(math.floor(self.sparsity * self.p * (self.p - 1) / 2 + 0.5))


def generate_truth(spec: TruthSpec, rng: np.random.Generator | None = None):
    """Unit lower-triangular ``L0`` with ``spec.signal`` on a uniform random set of positions.

    Returns ``(factor, pattern)`` with ``D = I``.
    """
    count = spec.n_edges
    n_positions = spec.p * (spec.p - 1) // 2
    if count < 1 or count > n_positions:
        raise ValueError(f"sparsity {spec.sparsity} gives {count} edges for p={spec.p}; "
                         f"need between 1 and {n_positions}")
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    rows, cols = np.tril_indices(spec.p, -1)
    pick = rng.choice(n_positions, size=count, replace=False)
    L = np.eye(spec.p)
    L[rows[pick], cols[pick]] = spec.signal
    factor = CholeskyFactor(L, np.ones(spec.p))
    return factor, pattern_of_factor(factor, 0.0)


@dataclass(frozen=True)
class MetricsRow:
    ppv: float
    tpr: float
    mcc: float
    counts: ConfusionCounts


def metrics(counts: ConfusionCounts) -> MetricsRow:
    """PPV, TPR and Matthews correlation; zero denominators give 0."""
    tp, fp, fn, tn = counts.tp, counts.fp, counts.fn, counts.tn
    ppv = tp / (tp + fp) if tp + fp else 0.0
    tpr = tp / (tp + fn) if tp + fn else 0.0
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = (tp * tn - fp * fn) / math.sqrt(denom) if denom else 0.0
    return MetricsRow(ppv=ppv, tpr=tpr, mcc=mcc, counts=counts)


def simulate(p: int, n: int, sparsity: float, seed: int, signal: float = 0.5):
    """Truth and an n x p data matrix, both reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    factor, truth = generate_truth(TruthSpec(p, sparsity, signal, seed), rng)
    Y = sample_gaussian(factor, n, rng)
    return factor, truth, Y


def n_for(p: int) -> int:
    """Sample size p / 3 used by the ratio study (floored)."""
    return p // 3


# posterior ratio study -------------------------------------------------------

RATIO_PRIORS = ("beta-mixture", "multiplicative")


@dataclass(frozen=True, order=True)
class RatioRow:
    p: int
    n: int
    case: int
    prior: str
    rep: int
    log_ratio: float


def _ratio_job(args):
    p, sparsity, rep, seed, priors, overrides = args
    n = n_for(p)
    _, truth, Y = simulate(p, n, sparsity, seed=_job_seed(seed, p, rep))
    rows = []
    for case in (1, 2, 3, 4):
        other = perturb_case(truth, case, np.random.default_rng(_job_seed(seed, p, rep, case)))
        for prior in priors:
            hyper = Hyperparameters.experiment_defaults(n, p, prior, **overrides)
            stats = sample_covariance(Y, hyper.tau_sq)
            try:
                value = log_posterior_ratio(other, truth, stats, hyper)
            except ArithmeticError as exc:
                raise RuntimeError(f"p={p}, case={case}, rep={rep}, prior={prior}: {exc}") from exc
            rows.append(RatioRow(p, n, case, prior, rep, value))
    return rows


def _job_seed(*parts: int) -> int:
    """Stable seed derived from integer parts."""
    return int(np.random.SeedSequence([int(x) for x in parts]).generate_state(1, np.uint64)[0])


def _run(jobs_fn, args_list, jobs):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(jobs_fn, args_list))
    else:
        results = [jobs_fn(a) for a in args_list]
    return [row for chunk in results for row in chunk]


def ratio_experiment(p_list: Sequence[int], sparsity: float = 0.03, reps: int = 20, seed: int = 0,
                     priors: Sequence[str] = RATIO_PRIORS, jobs: int = 1,
                     **hyper_overrides) -> list[RatioRow]:
    """log pi(Z | Y) - log pi(Z0 | Y) for the four perturbation cases, per p, rep and prior.

    Data use n = floor(p / 3) and the default study hyperparameters
    (see :meth:`Hyperparameters.experiment_defaults`).  Rows are sorted.
    """
    args = [(p, sparsity, rep, seed, tuple(priors), hyper_overrides)
            for p in p_list for rep in range(reps)]
    return sorted(_run(_ratio_job, args, jobs))


# selection study ---------------------------------------------------------------


@dataclass(frozen=True, order=True)
class SelectionRow:
    p: int
    n: int
    rep: int
    prior: str
    tp: int
    fp: int
    fn: int
    tn: int
    ppv: float
    tpr: float
    mcc: float
    edges: int
    score: float


def _selection_job(args):
    p, n, sparsity, rep, seed, prior, cfg, overrides = args
    _, truth, Y = simulate(p, n, sparsity, seed=_job_seed(seed, p, rep))
    hyper = Hyperparameters.experiment_defaults(n, p, prior, **overrides)
    stats = sample_covariance(Y, hyper.tau_sq)
    result = select_pattern(stats, hyper, cfg)
    m = metrics(compare(result.best.pattern, truth))
    c = m.counts
    return [SelectionRow(p, n, rep, prior, c.tp, c.fp, c.fn, c.tn, m.ppv, m.tpr, m.mcc,
                         result.best.pattern.n_edges, result.best.total)]


def selection_experiment(p_list: Sequence[int], sparsity: float = 0.03,
                         cfg: SearchConfig | None = None, prior: str = "beta-mixture",
                         reps: int = 20, seed: int = 0, n: int | None = None, jobs: int = 1,
                         **hyper_overrides) -> list[SelectionRow]:
    """Threshold + stochastic search selection against simulated truth, one row per (p, rep)."""
    cfg = cfg or SearchConfig(seed=seed)
    args = [(p, n if n is not None else n_for(p), sparsity, rep, seed, prior, cfg, hyper_overrides)
            for p in p_list for rep in range(reps)]
    return sorted(_run(_selection_job, args, jobs))


def summarize(rows: Sequence[SelectionRow]) -> dict[int, dict[str, float]]:
    """Mean PPV / TPR / MCC per p."""
    out: dict[int, dict[str, float]] = {}
    for p in sorted({r.p for r in rows}):
        sel = [r for r in rows if r.p == p]
        out[p] = {k: float(np.mean([getattr(r, k) for r in sel])) for k in ("ppv", "tpr", "mcc")}
    return out
