"""Estimates and order-independent reductions.

All Monte Carlo aggregation goes through ``math.fsum``, whose exactly
rounded result does not depend on summation order; together with the
counter-based streams this makes every estimate bit-identical across
worker counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = ["Estimate", "mean_se", "make_estimate", "effective_sample_size"]


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo value with its standard error and weight diagnostics."""

    value: float
    std_error: float
    ess: float
    n: int

    def agrees_with(self, other_value: float, k_sigma: float, extra: float = 0.0) -> bool:
        return abs(self.value - other_value) <= k_sigma * self.std_error + extra


def mean_se(values: np.ndarray) -> tuple[float, float]:
    vals = np.asarray(values, dtype=float).ravel().tolist()
    n = len(vals)
    if n == 0:
        raise ValueError("cannot average an empty sample")
    mean = math.fsum(vals) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
    return mean, math.sqrt(var / n)


def effective_sample_size(weights: np.ndarray) -> float:
    w = np.asarray(weights, dtype=float).ravel().tolist()
    s1 = math.fsum(w)
    s2 = math.fsum(v * v for v in w)
    if s2 == 0.0:
        return 0.0
    return s1 * s1 / s2


def make_estimate(values: np.ndarray, weights: Optional[np.ndarray] = None) -> Estimate:
    """Plain average of ``values`` with ESS taken from ``weights`` if given."""
    mean, se = mean_se(values)
    n = np.asarray(values).size
    ess = effective_sample_size(weights) if weights is not None else float(n)
    return Estimate(value=mean, std_error=se, ess=ess, n=int(n))
