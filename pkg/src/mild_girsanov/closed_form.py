"""Closed-form Ornstein-Uhlenbeck oracles used to cross-check the estimators.

For linear drift b(z) = c z the mild equation is an OU process per mode
with shifted rate lam - c, which gives exact terminal moments, invariant
variances and Gaussian density ratios.  These formulas are the primary
analytic oracle of the test suite.
"""

from __future__ import annotations

import numpy as np

from .spectral import OperatorSpec

__all__ = [
    "ou_terminal_mean",
    "ou_terminal_variance",
    "stationary_variance",
    "gaussian_char_fn",
    "gaussian_density_ratio_1d",
]


def _rates(spec: OperatorSpec, c: float) -> np.ndarray:
    rates = spec.eigenvalues - c
    if np.any(rates <= 0.0):
        raise ValueError("need c < min eigenvalue for the OU oracle")
    return rates


def ou_terminal_mean(spec: OperatorSpec, c: float, x: np.ndarray, t: float) -> np.ndarray:
    """E[Z_j(t)] = e^{-(lam_j - c) t} x_j for linear drift c."""
    return np.exp(-_rates(spec, c) * t) * np.asarray(x, dtype=float)


def ou_terminal_variance(spec: OperatorSpec, c: float, t: float) -> np.ndarray:
    """Var[Z_j(t)] = lam_j^{-eps} (1 - e^{-2(lam_j - c) t}) / (2 (lam_j - c))."""
    rates = _rates(spec, c)
    colour = spec.eigenvalues ** (-spec.epsilon)
    return colour * -np.expm1(-2.0 * rates * t) / (2.0 * rates)


def stationary_variance(spec: OperatorSpec, c: float = 0.0) -> np.ndarray:
    """Invariant per-mode variance lam^{-eps} / (2 (lam - c))."""
    rates = _rates(spec, c)
    colour = spec.eigenvalues ** (-spec.epsilon)
    return colour / (2.0 * rates)


def gaussian_char_fn(spec: OperatorSpec, xi: np.ndarray, x: np.ndarray, t: float) -> float:
    """Re E[exp(i <xi, Z(t)>)] for zero drift: the Gaussian characteristic function."""
    xi = np.asarray(xi, dtype=float)
    var = ou_terminal_variance(spec, 0.0, t)
    mean = np.exp(-spec.eigenvalues * t) * np.asarray(x, dtype=float)
    return float(np.exp(-0.5 * np.sum(xi * xi * var)) * np.cos(np.sum(xi * mean)))


def gaussian_density_ratio_1d(x: np.ndarray, var_num: float, var_den: float) -> np.ndarray:
    """Pointwise ratio N(0, var_num) / N(0, var_den) of centred normal densities."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(var_den / var_num) * np.exp(-0.5 * x * x * (1.0 / var_num - 1.0 / var_den))
