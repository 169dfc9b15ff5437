"""Hyperparameter and search configuration dataclasses."""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

PRIOR_KINDS = ("beta-mixture", "multiplicative", "erdos-renyi")


@dataclass(frozen=True)
class Hyperparameters:
    """Prior hyperparameters.

    ``tau_sq`` scales the slab variance, ``lambda1``/``lambda2`` are the
    inverse-gamma shape/scale on each ``d_j``, ``alpha1``/``alpha2`` the beta
    shapes, ``c`` the rate exponent tying ``alpha2`` to ``p``, and
    ``max_col_support`` the largest column support with nonzero prior mass.
    ``q`` is only used by the Erdos-Renyi prior.
    """

    tau_sq: float
    lambda1: float = 0.05
    lambda2: float = 0.05
    alpha1: float = 0.05
    alpha2: float = 1.0
    c: float = 2.0
    max_col_support: int = 10
    prior_kind: str = "beta-mixture"
    q: float | None = None

    def __post_init__(self):
        if self.prior_kind not in PRIOR_KINDS:
            raise ValueError(f"prior_kind must be one of {PRIOR_KINDS}, got {self.prior_kind!r}")
        if not self.tau_sq > 0:
            raise ValueError(f"tau_sq must be positive, got {self.tau_sq}")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be nonnegative")
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise ValueError("alpha1 and alpha2 must be positive")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.max_col_support < 1:
            raise ValueError(f"max_col_support must be >= 1, got {self.max_col_support}")
        if self.prior_kind == "erdos-renyi" and not (self.q is not None and 0 < self.q < 1):
            raise ValueError(f"erdos-renyi prior needs 0 < q < 1, got q={self.q}")

    @classmethod
    def experiment_defaults(cls, n: int, p: int, prior_kind: str = "beta-mixture",
                            **overrides) -> "Hyperparameters":
        """Settings of the simulation studies: c = 2, tau^2 = n, lambdas 0.05,
        alpha1 = 0.05, alpha2 = p^c, support cap floor(n / log n)."""
        c = overrides.pop("c", 2.0)
        base = dict(tau_sq=float(n), lambda1=0.05, lambda2=0.05, alpha1=0.05,
                    alpha2=float(p) ** c, c=c, max_col_support=default_support_cap(n),
                    prior_kind=prior_kind)
        base.update(overrides)
        return cls(**base)

    def with_(self, **changes) -> "Hyperparameters":
        return replace(self, **changes)

    def fingerprint(self, n: int, p: int) -> str:
        """Short hash identifying a scoring context (n, p and all hyperparameters)."""
        items = sorted(asdict(self).items())
        payload = repr((int(n), int(p), items)).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def default_support_cap(n: int) -> int:
    """floor(n / log n), at least 1."""
    if n < 3:
        return 1
    return max(1, int(math.floor(n / math.log(n))))


@dataclass(frozen=True)
class SearchConfig:
    """Threshold grid and shotgun stochastic search settings.

    The default grid runs from 0.1 to 0.5 in steps of 1e-4 (4000 thresholds,
    end point excluded) over the factor of ``(S + ridge I)^-1``.
    """

    grid_start: float = 0.1
    grid_end: float = 0.5
    grid_step: float = 0.0001
    ridge: float = 0.5
    sss_iterations: int = 500
    sss_top_m: int = 10
    n_seeds: int = 3
    screen: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.grid_start < self.grid_end:
            raise ValueError("grid_start must be below grid_end")
        if not self.grid_step > 0:
            raise ValueError("grid_step must be positive")
        if not self.ridge > 0:
            raise ValueError("ridge must be positive")
        if self.sss_top_m < 1 or self.n_seeds < 1:
            raise ValueError("sss_top_m and n_seeds must be >= 1")

    def thresholds(self) -> np.ndarray:
        count = int(round((self.grid_end - self.grid_start) / self.grid_step))
        return self.grid_start + self.grid_step * np.arange(count)
