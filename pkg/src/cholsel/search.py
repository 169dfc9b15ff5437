"""Searching the space of sparsity patterns.

Three pieces: candidate patterns from thresholding a ridge-regularized
Cholesky factor, best-improvement hill climbing over add / delete / swap
neighbourhoods (shotgun stochastic search), and brute-force enumeration for
small p.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .config import Hyperparameters, SearchConfig
from .linalg import SampleStats, modified_cholesky
from .pattern import SparsityPattern, format_pattern
from .priors import (log_beta_mixture_mass, log_prior, log_prior_multiplicative_laplace,
                     prior_depends_only_on_edge_count)
from .scoring import ScoredPattern, assemble, column_loglik


class ColumnCache:
    """Memoized column terms for one (stats, hyper) context."""

    def __init__(self, stats: SampleStats, hyper: Hyperparameters):
        self.stats = stats
        self.hyper = hyper
        self.context = hyper.fingerprint(stats.n, stats.p)
        self._terms: dict[tuple[int, tuple[int, ...]], float] = {}
        self._prior_by_k: dict[int, float] = {}

    def term(self, j: int, support: tuple[int, ...]) -> float:
        key = (j, support)
        value = self._terms.get(key)
        if value is None:
            value = self._terms[key] = column_loglik(self.stats, j, support, self.hyper)
        return value

    def prior(self, pattern: SparsityPattern) -> float:
        if not prior_depends_only_on_edge_count(self.hyper):
            return log_prior(pattern, self.hyper)
        if pattern.n_edges and pattern.column_sizes().max() > self.hyper.max_col_support:
            return -math.inf
        k = pattern.n_edges
        if k not in self._prior_by_k:
            self._prior_by_k[k] = log_prior(pattern, self.hyper)
        return self._prior_by_k[k]

    def score(self, pattern: SparsityPattern) -> ScoredPattern:
        """Same value, bit for bit, as :func:`cholsel.scoring.total_score`."""
        columns = tuple(self.term(j, s) for j, s in enumerate(pattern.supports))
        prior = self.prior(pattern)
        return ScoredPattern(pattern, assemble(prior, columns), prior, columns, self.context)


# threshold candidates --------------------------------------------------------


@dataclass(frozen=True)
class Candidate:
    pattern: SparsityPattern
    threshold: float
    truncated: bool


def _truncate(supports, L, cap):
    out, truncated = [], False
    for j, col in enumerate(supports):
        if len(col) > cap:
            truncated = True
            mags = np.abs(L[list(col), j])
            order = np.lexsort((np.asarray(col), -mags))[:cap]
            col = tuple(sorted(col[i] for i in order))
        out.append(tuple(col))
    return tuple(out), truncated


def threshold_candidates(stats: SampleStats, cfg: SearchConfig,
                         max_col_support: int | None = None) -> list[Candidate]:
    """Patterns of the modified Cholesky factor of ``(S + ridge I)^-1`` over the threshold grid.

    Candidates come back in grid order (increasing threshold, so decreasing
    density) with duplicates dropped.  Columns above ``max_col_support`` keep
    their largest-magnitude entries and the candidate is flagged.
    """
    p = stats.p
    W = la.inv(stats.S + cfg.ridge * np.eye(p))
    L = modified_cholesky(0.5 * (W + W.T)).L
    rows, cols = np.tril_indices(p, -1)
    mags = np.abs(L[rows, cols])
    order = np.argsort(-mags, kind="stable")
    sorted_mags = mags[order]
    # number of entries strictly above each threshold
    counts = np.searchsorted(-sorted_mags, -cfg.thresholds(), side="left")

    out: list[Candidate] = []
    seen: set[SparsityPattern] = set()
    cap = max_col_support if max_col_support is not None else p
    prev_count = None
    for t, count in zip(cfg.thresholds(), counts):
        if count == prev_count:
            continue
        prev_count = count
        chosen = order[:count]
        supports = [[] for _ in range(p - 1)]
        for idx in chosen:
            supports[cols[idx]].append(int(rows[idx]))
        supports = [tuple(sorted(s)) for s in supports]
        supports, truncated = _truncate(supports, L, cap)
        pattern = SparsityPattern(p, supports)
        if pattern in seen:
            continue
        seen.add(pattern)
        out.append(Candidate(pattern, float(t), truncated))
    return out


# neighbourhood tables ---------------------------------------------------------


def _vector_terms(n, hyper, cond, logdet, size):
    """Vectorized column terms; invalid entries (conditioning failures) become -inf."""
    bracket = n * cond / 2 - 1 / (2 * hyper.tau_sq) + hyper.lambda2
    ok = (bracket >= hyper.lambda2 / 2) & (bracket > 0) & (cond > 1e-300) & np.isfinite(logdet)
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = (-(n / 2 + hyper.lambda1) * np.log(np.where(ok, bracket, 1.0))
                 - 0.5 * logdet - 0.5 * size * math.log(n * hyper.tau_sq))
    return np.where(ok, terms, -np.inf), int((~ok).sum())


@dataclass
class _ColumnMoves:
    """Likelihood deltas for every move touching one column."""

    add_rows: np.ndarray
    add_delta: np.ndarray
    del_rows: np.ndarray
    del_delta: np.ndarray
    swap_out: np.ndarray
    swap_in: np.ndarray
    swap_delta: np.ndarray
    evaluated: int
    errors: int


def _additions(stats, hyper, j, support, candidates):
    """Column terms after adding each row in ``candidates`` to ``support``."""
    St = stats.S_tilde
    A = np.asarray(support, dtype=int)
    size = len(support) + 1
    if A.size == 0:
        cond_j = St[j, j]
        part_kk = St[candidates, candidates]
        part_jk = St[j, candidates]
        base_logdet = 0.0
    else:
        C = la.cho_factor(St[np.ix_(A, A)], lower=True, check_finite=False)
        X = la.cho_solve(C, St[np.ix_(A, candidates)], check_finite=False)
        b = la.cho_solve(C, St[A, j], check_finite=False)
        cond_j = St[j, j] - St[A, j] @ b
        part_kk = St[candidates, candidates] - np.einsum("ik,ik->k", St[np.ix_(A, candidates)], X)
        part_jk = St[j, candidates] - St[A, j] @ X
        base_logdet = 2.0 * np.log(np.diag(C[0])).sum()
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = cond_j - part_jk ** 2 / part_kk
        logdet = base_logdet + np.where(part_kk > 0, np.log(np.maximum(part_kk, 1e-300)), np.nan)
    return _vector_terms(stats.n, hyper, cond, logdet, size)


def _column_moves(stats, hyper, j, support, current_term, rng, swap_cap):
    p = stats.p
    cap = hyper.max_col_support
    in_support = np.zeros(p, dtype=bool)
    in_support[list(support)] = True
    free = np.array([k for k in range(j + 1, p) if not in_support[k]], dtype=int)
    evaluated = errors = 0
    empty_i, empty_f = np.empty(0, dtype=int), np.empty(0)

    add_rows, add_delta = empty_i, empty_f
    if free.size and len(support) < cap:
        terms, bad = _additions(stats, hyper, j, support, free)
        add_rows, add_delta = free, terms - current_term
        evaluated += free.size
        errors += bad

    del_rows, del_delta = empty_i, empty_f
    swap_out, swap_in, swap_delta = [], [], []
    if support:
        del_rows = np.asarray(support, dtype=int)
        vals = []
        for r in support:
            reduced = tuple(x for x in support if x != r)
            try:
                vals.append(column_loglik(stats, j, reduced, hyper) - current_term)
            except ArithmeticError:
                vals.append(-np.inf)
                errors += 1
        del_delta = np.asarray(vals)
        evaluated += len(support)

        if free.size:
            pairs = [(r, k) for r in support for k in free]
            if len(pairs) > swap_cap:
                keep = np.sort(rng.choice(len(pairs), size=swap_cap, replace=False))
                pairs = [pairs[i] for i in keep]
            by_out: dict[int, list[int]] = {}
            for r, k in pairs:
                by_out.setdefault(r, []).append(k)
            for r, ks in by_out.items():
                reduced = tuple(x for x in support if x != r)
                ks = np.asarray(ks, dtype=int)
                terms, bad = _additions(stats, hyper, j, reduced, ks)
                swap_out.append(np.full(ks.size, r))
                swap_in.append(ks)
                swap_delta.append(terms - current_term)
                evaluated += ks.size
                errors += bad
    cat = (lambda xs, e: np.concatenate(xs) if xs else e)
    return _ColumnMoves(add_rows, add_delta, del_rows, del_delta,
                        cat(swap_out, empty_i), cat(swap_in, empty_i), cat(swap_delta, empty_f),
                        evaluated, errors)


# hill climbing ------------------------------------------------------------------


@dataclass
class SearchResult:
    best: ScoredPattern
    top_m: list[ScoredPattern]
    candidates_evaluated: int
    trace: list[float]
    errors: int = 0
    moves: int = 0
    truncated_seeds: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "best": {**self.best.to_dict(), "pattern": format_pattern(self.best.pattern)},
            "top_m": [{**s.to_dict(), "pattern": format_pattern(s.pattern)} for s in self.top_m],
            "candidates_evaluated": self.candidates_evaluated,
            "trace": list(self.trace),
            "errors": self.errors,
            "moves": self.moves,
        }


class _TopM:
    """Best m distinct patterns seen, ordered by total then the pattern tie-break."""

    def __init__(self, m: int):
        self.m = m
        self._items: dict[SparsityPattern, ScoredPattern] = {}

    def offer(self, scored: ScoredPattern) -> None:
        if scored.pattern in self._items or not scored.total > -math.inf:
            return
        self._items[scored.pattern] = scored
        if len(self._items) > self.m:
            worst = max(self._items.values(), key=_rank_key)
            del self._items[worst.pattern]

    def ranked(self) -> list[ScoredPattern]:
        return sorted(self._items.values(), key=_rank_key)


def _rank_key(s: ScoredPattern):
    return (-s.total, s.pattern.sort_key())


def _apply(pattern, kind, j, out_row, in_row):
    support = set(pattern.supports[j])
    if kind in ("del", "swap"):
        support.discard(out_row)
    if kind in ("add", "swap"):
        support.add(in_row)
    return pattern.with_column(j, support)


def _prior_shift(hyper, p, k_edges):
    """Exact prior deltas (add, delete) for priors that depend only on the edge count."""
    if hyper.prior_kind == "beta-mixture":
        f = lambda k: log_beta_mixture_mass(p, k, hyper.alpha1, hyper.alpha2)  # noqa: E731
    else:
        q = hyper.q
        f = lambda k: k * math.log(q) + (p * (p - 1) // 2 - k) * math.log1p(-q)  # noqa: E731
    here = f(k_edges)
    add = f(k_edges + 1) - here if k_edges < p * (p - 1) // 2 else -np.inf
    delete = f(k_edges - 1) - here if k_edges > 0 else -np.inf
    return add, delete


def _log_odds(x):
    return np.log(x) - np.log1p(-x)


def _walk(seed, walk_index, cache: ColumnCache, cfg: SearchConfig, top: _TopM, trace, best_so_far):
    stats, hyper = cache.stats, cache.hyper
    p = stats.p
    swap_cap = 10 * p
    exact_prior = prior_depends_only_on_edge_count(hyper)
    current = cache.score(seed)
    top.offer(current)
    best_so_far = max(best_so_far, current.total)
    evaluated = errors = moves = 0

    def moves_for(j, step):
        rng = np.random.default_rng([cfg.seed, walk_index, step, j])
        try:
            return _column_moves(stats, hyper, j, current.pattern.supports[j],
                                 current.column_terms[j], rng, swap_cap)
        except (ArithmeticError, la.LinAlgError):
            return None

    tables = {j: moves_for(j, 0) for j in range(p - 1)}
    for step in range(1, cfg.sss_iterations + 1):
        # gather every move with its (approximate) total delta
        kinds, cols, outs, ins, deltas = [], [], [], [], []
        if exact_prior:
            add_shift, del_shift = _prior_shift(hyper, p, current.pattern.n_edges)
        else:
            mode = log_prior_multiplicative_laplace(
                current.pattern, hyper.alpha1, hyper.alpha2).mode
        for j in range(p - 1):
            t = tables[j]
            if t is None:
                errors += 1
                continue
            evaluated += t.evaluated
            errors += t.errors
            if exact_prior:
                a_prior = np.full(t.add_rows.size, add_shift)
                d_prior = np.full(t.del_rows.size, del_shift)
                s_prior = np.zeros(t.swap_in.size)
            else:
                a_prior = _log_odds(mode[t.add_rows] * mode[j])
                d_prior = -_log_odds(mode[t.del_rows] * mode[j])
                s_prior = _log_odds(mode[t.swap_in] * mode[j]) - _log_odds(mode[t.swap_out] * mode[j])
            for kind, o, i, d, pr in (("add", None, t.add_rows, t.add_delta, a_prior),
                                      ("del", t.del_rows, None, t.del_delta, d_prior),
                                      ("swap", t.swap_out, t.swap_in, t.swap_delta, s_prior)):
                size = d.size
                if not size:
                    continue
                kinds.append(np.full(size, ("add", "del", "swap").index(kind)))
                cols.append(np.full(size, j))
                outs.append(o if o is not None else np.full(size, -1))
                ins.append(i if i is not None else np.full(size, -1))
                deltas.append(d + pr)
        if not deltas:
            break
        kinds, cols, outs, ins, deltas = map(np.concatenate, (kinds, cols, outs, ins, deltas))
        finite = np.isfinite(deltas)
        if not finite.any():
            break
        # candidate set to score exactly: top-m always, plus the screen for approximate priors
        n_exact = top.m if exact_prior else max(top.m, cfg.screen or deltas.size)
        n_exact = min(n_exact, int(finite.sum()))
        # stable ordering: delta descending, then enumeration order
        order = np.lexsort((np.arange(deltas.size), -np.where(finite, deltas, -np.inf)))[:n_exact]
        scored = []
        for idx in order:
            kind = ("add", "del", "swap")[kinds[idx]]
            nb = _apply(current.pattern, kind, int(cols[idx]), int(outs[idx]), int(ins[idx]))
            try:
                s = cache.score(nb)
            except (ArithmeticError, la.LinAlgError):
                errors += 1
                continue
            top.offer(s)
            scored.append((s, int(cols[idx])))
        if not scored:
            break
        nxt, moved_col = min(scored, key=lambda sc: _rank_key(sc[0]))
        if not nxt.total > current.total:
            trace.append(best_so_far)
            break
        current = nxt
        moves += 1
        best_so_far = max(best_so_far, current.total)
        trace.append(best_so_far)
        tables[moved_col] = moves_for(moved_col, step)
    return evaluated, errors, moves, best_so_far


def sss_refine(seeds, stats: SampleStats, hyper: Hyperparameters, cfg: SearchConfig,
               cache: ColumnCache | None = None) -> SearchResult:
    """Best-improvement hill climbing from each seed, keeping the global top m.

    A move adds one edge, deletes one edge, or swaps a present edge for an
    absent one in the same column.  Additions into columns already at
    ``hyper.max_col_support`` are skipped.  Swap sets larger than ``10 p`` in a
    column are subsampled with a generator keyed on ``cfg.seed``, the walk,
    the step and the column, so results do not depend on evaluation order.

    For the multiplicative prior, neighbours are ranked by likelihood delta
    plus a plug-in prior delta at the current Laplace mode and the best
    ``cfg.screen`` of them (all, if ``screen`` is None) are scored exactly.
    """
    seeds = list(dict.fromkeys(seeds))
    if not seeds:
        raise ValueError("sss_refine needs at least one seed")
    cache = cache or ColumnCache(stats, hyper)
    top = _TopM(cfg.sss_top_m)
    trace: list[float] = []
    best = -math.inf
    evaluated = errors = moves = 0
    for w, seed in enumerate(seeds):
        e, err, mv, best = _walk(seed, w, cache, cfg, top, trace, best)
        evaluated += e
        errors += err
        moves += mv
    ranked = top.ranked()
    if not ranked:
        raise ArithmeticError("every pattern visited had zero posterior mass")
    return SearchResult(best=ranked[0], top_m=ranked, candidates_evaluated=evaluated,
                        trace=trace, errors=errors, moves=moves)


def select_pattern(stats: SampleStats, hyper: Hyperparameters, cfg: SearchConfig,
                   extra_seeds=()) -> SearchResult:
    """Threshold candidates, scored; the best ``cfg.n_seeds`` seed the stochastic search."""
    cache = ColumnCache(stats, hyper)
    candidates = threshold_candidates(stats, cfg, hyper.max_col_support)
    scored = [cache.score(c.pattern) for c in candidates]
    for s in extra_seeds:
        scored.append(cache.score(s))
    scored.sort(key=_rank_key)
    seeds = [s.pattern for s in scored[:cfg.n_seeds]]
    result = sss_refine(seeds, stats, hyper, cfg, cache=cache)
    result.truncated_seeds = sum(c.truncated for c in candidates)
    result.extra["n_candidates"] = len(candidates)
    result.candidates_evaluated += len(scored)
    return result


# exhaustive enumeration -----------------------------------------------------


def score_all_patterns(stats: SampleStats, hyper: Hyperparameters,
                       max_patterns: int = 2 ** 15) -> list[ScoredPattern]:
    """Score every pattern of dimension p (column subsets enumerated per column)."""
    p = stats.p
    n_positions = p * (p - 1) // 2
    if 2 ** n_positions > max_patterns:
        raise ValueError(f"p={p} has 2^{n_positions} patterns, above the limit {max_patterns}")
    cache = ColumnCache(stats, hyper)
    per_column = []
    for j in range(p - 1):
        rows = range(j + 1, p)
        per_column.append([sub for r in range(len(rows) + 1)
                           for sub in itertools.combinations(rows, r)])
    out = []
    for supports in itertools.product(*per_column):
        out.append(cache.score(SparsityPattern(p, supports)))
    return out


def exhaustive_mode(stats: SampleStats, hyper: Hyperparameters,
                    max_patterns: int = 2 ** 15) -> ScoredPattern:
    """Posterior mode by enumeration; ties go to fewer edges, then the smaller edge list."""
    return min(score_all_patterns(stats, hyper, max_patterns), key=_rank_key)

