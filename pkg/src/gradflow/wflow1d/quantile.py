"""Probability measures on the line as sampled quantile functions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import norm

__all__ = ["QuantileRepr", "midpoints", "from_ppf", "gaussian", "wasserstein_p"]


def midpoints(M: int) -> np.ndarray:
    """Quantile levels ``s_j = (j - 1/2) / M``."""
    return (np.arange(M) + 0.5) / M


@dataclass(frozen=True)
class QuantileRepr:
    """Nondecreasing samples ``X_j = X(s_j)`` of an inverse CDF.

    Each sample carries mass ``1/M``. In 1D the monotone rearrangement is
    optimal, so Wasserstein distances are plain averages over ``j``.
    """

    X: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 1 or X.size < 2:
            raise ValueError("need a 1D array of at least two quantiles")
        if not np.all(np.isfinite(X)):
            raise ValueError("quantiles must be finite")
        if np.any(np.diff(X) < 0):
            raise ValueError("quantiles must be nondecreasing")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)

    @property
    def M(self) -> int:
        return self.X.size

    @property
    def s(self) -> np.ndarray:
        return midpoints(self.M)

    @property
    def support(self) -> tuple:
        return float(self.X[0]), float(self.X[-1])

    def moment(self, p: float) -> float:
        return float(np.mean(np.abs(self.X) ** p))

    def mean(self) -> float:
        return float(np.mean(self.X))

    def density(self):
        """Piecewise-constant density: gap midpoints and values ``1/(M gap)``."""
        g = np.diff(self.X)
        with np.errstate(divide="ignore"):
            return 0.5 * (self.X[1:] + self.X[:-1]), 1.0 / (self.M * g)

    def shifted(self, c: float) -> "QuantileRepr":
        return QuantileRepr(self.X + c)


def from_ppf(ppf: Callable, M: int) -> QuantileRepr:
    """Sample a quantile function at the midpoint levels."""
    return QuantileRepr(np.asarray(ppf(midpoints(M)), dtype=float))


def gaussian(m: float = 0.0, sigma: float = 1.0, M: int = 2048) -> QuantileRepr:
    """Quantiles of ``N(m, sigma^2)``."""
    return QuantileRepr(m + sigma * norm.ppf(midpoints(M)))


def wasserstein_p(X1: QuantileRepr, X2: QuantileRepr, p: float = 2.0) -> float:
    """``((1/M) sum |X1_j - X2_j|^p)^(1/p)``."""
    if X1.M != X2.M:
        raise ValueError("quantile counts differ")
    if not p >= 1:
        raise ValueError("p must be at least 1")
    return float(np.mean(np.abs(X1.X - X2.X) ** p) ** (1.0 / p))
