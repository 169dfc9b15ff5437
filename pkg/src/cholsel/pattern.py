"""Sparsity patterns of a unit lower-triangular Cholesky factor.

A pattern records, for every column ``j`` of ``L``, the set of rows ``k > j``
whose entry ``L[k, j]`` is nonzero.  Indices are 0-based in memory; the text
format on disk is 1-based (see :func:`format_pattern`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator

import numpy as np


class PatternError(ValueError):
    """Raised for malformed or incompatible sparsity patterns."""


@dataclass(frozen=True)
class SparsityPattern:
    """Per-column supports of the strictly lower triangle of a p x p factor.

    ``supports[j]`` is a sorted tuple of row indices ``k`` with ``j < k < p``.
    There are ``p - 1`` columns; the last column of ``L`` never has entries.
    """

    p: int
    supports: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.p < 2:
            raise PatternError(f"dimension must be >= 2, got p={self.p}")
        supports = tuple(tuple(int(k) for k in col) for col in self.supports)
        if len(supports) != self.p - 1:
            raise PatternError(
                f"expected {self.p - 1} column supports, got {len(supports)}")
        for j, col in enumerate(supports):
            for a, b in zip(col, col[1:]):
                if b <= a:
                    raise PatternError(
                        f"column {j}: support must be strictly increasing, got {col}")
            if col and (col[0] <= j or col[-1] >= self.p):
                raise PatternError(
                    f"column {j}: rows must lie in ({j}, {self.p - 1}], got {col}")
        object.__setattr__(self, "supports", supports)

    # construction -------------------------------------------------------

    @classmethod
    def empty(cls, p: int) -> "SparsityPattern":
        return cls(p, tuple(() for _ in range(p - 1)))

    @classmethod
    def full(cls, p: int) -> "SparsityPattern":
        return cls(p, tuple(tuple(range(j + 1, p)) for j in range(p - 1)))

    @classmethod
    def from_edges(cls, p: int, edges: Iterable[tuple[int, int]]) -> "SparsityPattern":
        """Build from ``(k, j)`` pairs with ``k > j`` (0-based)."""
        cols: list[set[int]] = [set() for _ in range(p - 1)]
        for k, j in edges:
            k, j = int(k), int(j)
            if not 0 <= j < k < p:
                raise PatternError(f"edge ({k}, {j}) is not strictly lower triangular for p={p}")
            cols[j].add(k)
        return cls(p, tuple(tuple(sorted(c)) for c in cols))

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "SparsityPattern":
        """Build from a boolean p x p matrix; only the strict lower triangle is read."""
        mask = np.asarray(mask, dtype=bool)
        p = mask.shape[0]
        if mask.shape != (p, p):
            raise PatternError(f"mask must be square, got shape {mask.shape}")
        return cls(p, tuple(tuple(int(k) for k in np.flatnonzero(mask[j + 1:, j]) + j + 1)
                            for j in range(p - 1)))

    # views ----------------------------------------------------------------

    @property
    def n_positions(self) -> int:
        return self.p * (self.p - 1) // 2

    @cached_property
    def n_edges(self) -> int:
        return sum(len(col) for col in self.supports)

    @cached_property
    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.edges())

    def edges(self) -> Iterator[tuple[int, int]]:
        """Yield ``(k, j)`` pairs sorted by column then row."""
        for j, col in enumerate(self.supports):
            for k in col:
                yield k, j

    def column_sizes(self) -> np.ndarray:
        return np.array([len(col) for col in self.supports], dtype=int)

    def degrees(self) -> np.ndarray:
        """Number of edges touching each of the p nodes."""
        deg = np.zeros(self.p, dtype=int)
        for k, j in self.edges():
            deg[k] += 1
            deg[j] += 1
        return deg

    def to_mask(self) -> np.ndarray:
        mask = np.zeros((self.p, self.p), dtype=bool)
        for k, j in self.edges():
            mask[k, j] = True
        return mask

    def sort_key(self) -> tuple:
        """Tie-break key: fewer edges first, then lexicographic edge list."""
        return (self.n_edges, tuple(sorted((j, k) for k, j in self.edges())))

    # mutation (returns new patterns) ---------------------------------------

    def with_column(self, j: int, support: Iterable[int]) -> "SparsityPattern":
        cols = list(self.supports)
        cols[j] = tuple(sorted(support))
        return SparsityPattern(self.p, tuple(cols))

    def add_edge(self, k: int, j: int) -> "SparsityPattern":
        if k in self.supports[j]:
            raise PatternError(f"edge ({k}, {j}) already present")
        return self.with_column(j, self.supports[j] + (k,))

    def remove_edge(self, k: int, j: int) -> "SparsityPattern":
        if k not in self.supports[j]:
            raise PatternError(f"edge ({k}, {j}) not present")
        return self.with_column(j, (r for r in self.supports[j] if r != k))

    def is_subpattern_of(self, other: "SparsityPattern") -> bool:
        _check_same_p(self, other)
        return self.edge_set <= other.edge_set


def _check_same_p(a: SparsityPattern, b: SparsityPattern) -> None:
    if a.p != b.p:
        raise PatternError(f"dimension mismatch: p={a.p} vs p={b.p}")


@dataclass(frozen=True)
class CholeskyFactor:
    """Unit lower-triangular ``L`` and positive diagonal ``d`` with Omega = L D^-1 L^T."""

    L: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        L = np.array(self.L, dtype=float)
        d = np.array(self.d, dtype=float)
        p = L.shape[0]
        if L.shape != (p, p) or d.shape != (p,):
            raise ValueError(f"inconsistent shapes L{L.shape}, d{d.shape}")
        if not np.array_equal(np.diag(L), np.ones(p)):
            raise ValueError("diagonal of L must be exactly 1")
        if np.any(np.triu(L, 1) != 0):
            raise ValueError("L must be lower triangular")
        if np.any(d <= 0):
            raise ValueError("diagonal entries of D must be strictly positive")
        L.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "d", d)

    @property
    def p(self) -> int:
        return self.L.shape[0]

    def precision(self) -> np.ndarray:
        return (self.L / self.d) @ self.L.T


def pattern_of_factor(factor: CholeskyFactor | np.ndarray, threshold: float = 0.0) -> SparsityPattern:
    """Support of the entries of ``L`` below the diagonal with ``|L[k, j]| > threshold``."""
    if threshold < 0:
        raise ValueError(f"threshold must be nonnegative, got {threshold}")
    L = factor.L if isinstance(factor, CholeskyFactor) else np.asarray(factor, dtype=float)
    return SparsityPattern.from_mask(np.tril(np.abs(L) > threshold, -1))


def factor_of_pattern(pattern: SparsityPattern, value: float = 1.0) -> CholeskyFactor:
    """Unit lower-triangular factor with ``value`` on every edge of ``pattern`` and D = I."""
    L = np.eye(pattern.p)
    for k, j in pattern.edges():
        L[k, j] = value
    return CholeskyFactor(L, np.ones(pattern.p))


# confusion counts ----------------------------------------------------------


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def compare(estimate: SparsityPattern, truth: SparsityPattern) -> ConfusionCounts:
    """Confusion counts of ``estimate`` against ``truth`` over all p(p-1)/2 positions."""
    _check_same_p(estimate, truth)
    est, tru = estimate.edge_set, truth.edge_set
    tp = len(est & tru)
    fp = len(est - tru)
    fn = len(tru - est)
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=estimate.n_positions - tp - fp - fn)


# the four "non-true" perturbations ----------------------------------------


def _lower_positions(p: int) -> np.ndarray:
    """All (k, j) positions with k > j, ordered by column then row."""
    rows, cols = np.triu_indices(p, 1)  # (j, k) with j < k, row-major in j
    return np.column_stack([cols, rows])


def perturb_case(truth: SparsityPattern, case: int, rng: np.random.Generator) -> SparsityPattern:
    """Draw one of the four non-true patterns used in the posterior ratio study.

    Parameters
    ----------
    truth : SparsityPattern
        Nonempty reference pattern with ``E`` edges.
    case : {1, 2, 3, 4}
        1: uniform submodel with ceil(E/2) edges.
        2: uniform supermodel with 2E edges.
        3: uniform pattern with ceil(E/2) edges anywhere in the lower triangle.
        4: uniform pattern with 2E edges anywhere in the lower triangle.
    rng : numpy.random.Generator
        Source of randomness; the result is a pure function of its state.
    """
    n_true = truth.n_edges
    if n_true == 0:
        raise PatternError("perturb_case needs a nonempty reference pattern")
    half, double = math.ceil(n_true / 2), 2 * n_true
    capacity = truth.n_positions
    if case in (2, 4) and double > capacity:
        raise PatternError(
            f"case {case} requests {double} edges but only {capacity} positions exist")

    present = np.array(sorted(truth.edges(), key=lambda e: (e[1], e[0])), dtype=int)
    if case == 1:
        keep = rng.choice(n_true, size=half, replace=False)
        return SparsityPattern.from_edges(truth.p, map(tuple, present[keep]))
    if case == 2:
        positions = _lower_positions(truth.p)
        absent = np.array([tuple(e) not in truth.edge_set for e in positions.tolist()])
        extra = rng.choice(np.flatnonzero(absent), size=double - n_true, replace=False)
        edges = [tuple(e) for e in present.tolist()] + [tuple(e) for e in positions[extra].tolist()]
        return SparsityPattern.from_edges(truth.p, edges)
    if case in (3, 4):
        size = half if case == 3 else double
        positions = _lower_positions(truth.p)
        while True:
            pick = rng.choice(capacity, size=size, replace=False)
            out = SparsityPattern.from_edges(truth.p, map(tuple, positions[pick].tolist()))
            if out != truth:
                return out
    raise ValueError(f"case must be one of 1, 2, 3, 4; got {case!r}")


# text format ----------------------------------------------------------------


def format_pattern(pattern: SparsityPattern) -> str:
    """Render as ``p=<int>`` followed by one 1-based ``k,j`` line per edge, sorted by (j, k)."""
    lines = [f"p={pattern.p}"]
    lines.extend(f"{k + 1},{j + 1}" for k, j in pattern.edges())
    return "\n".join(lines) + "\n"


def parse_pattern(text: str) -> SparsityPattern:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("p="):
        raise PatternError("pattern text must start with a 'p=<int>' header")
    p = int(lines[0][2:])
    edges = []
    for ln in lines[1:]:
        k, j = (int(x) for x in ln.split(","))
        edges.append((k - 1, j - 1))
    if len(set(edges)) != len(edges):
        raise PatternError("duplicate edge in pattern text")
    return SparsityPattern.from_edges(p, edges)


def read_pattern(path) -> SparsityPattern:
    with open(path) as fh:
        return parse_pattern(fh.read())


def write_pattern(pattern: SparsityPattern, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(format_pattern(pattern))


def all_patterns(p: int) -> Iterator[SparsityPattern]:
    """Every pattern of dimension p, in order of the bitmask over column-major positions."""
    positions = [tuple(e) for e in _lower_positions(p).tolist()]
    for mask in range(1 << len(positions)):
        yield SparsityPattern.from_edges(
            p, (positions[i] for i in range(len(positions)) if mask >> i & 1))

