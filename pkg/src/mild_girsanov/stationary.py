"""Invariant-measure machinery on a finite window approximating (-inf, 0].

Stationary convolution paths are sampled exactly (stationary initial
marginal plus the same coupled pair recursion as on [0, T]); the
change-of-measure weight on the window then represents integrals against
the invariant measure of the drifted equation as weighted averages of the
path value at time 0.  An ergodic long-run simulation provides an
independent oracle, and a kernel regression of the weight on the first
coordinate at time 0 estimates the density of the drifted invariant
measure against the undrifted one.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from . import engine
from .spectral import DriftSpec, OperatorSpec
from .stats import Estimate, effective_sample_size, make_estimate, mean_se
from .streams import PathStream, Role, normal_block
from .estimators import WeightedSample, ESS_WARN_FRACTION

__all__ = [
    "WindowGrid",
    "StationarySample",
    "sample_stationary",
    "stationary_log_weight",
    "truncation_bound",
    "invariant_estimate",
    "invariant_window_delta",
    "long_run_oracle",
    "density_ratio_estimate",
]

TRUNCATION_WARN = 1e-6


@dataclass(frozen=True)
class WindowGrid:
    """Uniform grid -S = t_0 < ... < t_Nw = 0 approximating (-inf, 0]."""

    S: float
    N: int

    def __post_init__(self) -> None:
        if self.S <= 0.0:
            raise ValueError(f"window length must be positive, got {self.S}")
        if self.N < 2:
            raise ValueError(f"need at least 2 window steps, got {self.N}")

    @property
    def dt(self) -> float:
        return self.S / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-self.S, 0.0, self.N + 1)


def default_window(spec: OperatorSpec, steps_per_unit_time: int = 32) -> WindowGrid:
    """Window of length 8 / omega, which makes the truncation tail e^{-8}."""
    s = 8.0 / spec.omega
    return WindowGrid(S=s, N=max(2, int(round(s * steps_per_unit_time))))


@dataclass(frozen=True)
class StationarySample:
    h: np.ndarray
    db: np.ndarray
    seed: int


def _require_white(spec: OperatorSpec) -> None:
    if spec.epsilon != 0.0:
        raise ValueError("stationary sampling is white-noise only (epsilon = 0)")


def sample_stationary(
    spec: OperatorSpec, window: WindowGrid, stream: PathStream
) -> StationarySample:
    """One stationary path: N(0, 1/(2 lam)) start, exact OU steps after."""
    _require_white(spec)
    coeff = engine.step_coefficients(spec, window.dt)
    h, db = engine.ou_batch(
        spec, coeff, window.N, stream.seed, stream.role, stream.index, 1,
        stationary_init=True,
    )
    return StationarySample(h=h[0], db=db[0], seed=stream.seed)


def truncation_bound(spec: OperatorSpec, drift: DriftSpec, window: WindowGrid) -> float:
    """Bound on the drift convolution lost by starting the window at -S.

    |missing mass at t = 0| <= C_b e^{-omega S} / omega with C_b the sup
    bound, or for linear drift |c| E|h| under the stationary marginal.
    """
    if drift.sup_bound is not None:
        c_b = drift.sup_bound
    elif drift.kind == "linear":
        c_b = abs(drift.c) * math.sqrt(float(np.sum(0.5 / spec.eigenvalues)))
    else:
        raise ValueError("truncation bound needs a bounded or linear drift")
    return c_b * math.exp(-spec.omega * window.S) / spec.omega


def _window_weights_batch(spec, drift, coeff, h, db):
    d = spec.d
    semx = np.zeros((d, h.shape[2] - 1))
    _, f = engine.gamma_batch(spec, drift, coeff, semx, h)
    cm, ito = engine.weight_batch(coeff, f, db)
    return -0.5 * cm + ito


def stationary_log_weight(
    spec: OperatorSpec,
    drift: DriftSpec,
    sample: StationarySample,
    window: WindowGrid,
) -> WeightedSample:
    """Window change-of-measure weight with zero-initialized convolution.

    The convolution recursion starts from 0 at -S; the resulting bias is
    the recorded truncation bound (warned about when above 1e-6).
    """
    _require_white(spec)
    bound = truncation_bound(spec, drift, window)
    if bound > TRUNCATION_WARN:
        warnings.warn(
            f"window truncation bound {bound:.2e} exceeds {TRUNCATION_WARN:.0e}; "
            "consider a longer window",
            RuntimeWarning,
            stacklevel=2,
        )
    coeff = engine.step_coefficients(spec, window.dt)
    semx = np.zeros((spec.d, window.N))
    _, f = engine.gamma_batch(spec, drift, coeff, semx, sample.h[None, :, :])
    cm, ito = engine.weight_batch(coeff, f, sample.db[None, :, :])
    return WeightedSample(
        log_weight=float(-0.5 * cm[0] + ito[0]),
        cm_sq=float(cm[0]),
        ito=float(ito[0]),
        sample_ref=sample.seed,
    )


def _state_fn(phi) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(phi, str):
        from .functionals import state_function

        return state_function(phi)
    return phi


def invariant_estimate(
    spec: OperatorSpec,
    drift: DriftSpec,
    window: WindowGrid,
    phi,
    m_samples: int,
    seed: int = 0,
    workers: int = 1,
    path_functional: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> Estimate:
    """Weighted stationary estimate of int phi d(nu).

    Averages phi(h(0)) rho over stationary window samples; a general path
    functional over the whole window may be supplied instead of the state
    function.
    """
    _require_white(spec)
    drift.validate_against(spec)
    fn = None if path_functional is not None else _state_fn(phi)
    coeff = engine.step_coefficients(spec, window.dt)

    vals = np.empty(m_samples)
    logw = np.empty(m_samples)

    def chunk(start: int, count: int) -> None:
        h, db = engine.ou_batch(
            spec, coeff, window.N, seed, Role.STATIONARY, start, count,
            stationary_init=True,
        )
        logw[start : start + count] = _window_weights_batch(spec, drift, coeff, h, db)
        if path_functional is not None:
            vals[start : start + count] = path_functional(h)
        else:
            vals[start : start + count] = fn(h[:, :, -1])

    engine.map_samples(m_samples, workers, chunk)
    rho = np.exp(logw)
    ess = effective_sample_size(rho)
    if ess / m_samples < ESS_WARN_FRACTION:
        warnings.warn(
            f"stationary weights are degenerate: ESS/n = {ess / m_samples:.4f}",
            RuntimeWarning,
            stacklevel=2,
        )
    return make_estimate(vals * rho, weights=rho)


def invariant_window_delta(
    spec: OperatorSpec,
    drift: DriftSpec,
    window: WindowGrid,
    phi,
    m_samples: int,
    seed: int = 0,
    workers: int = 1,
) -> dict:
    """Effect of halving the window, on shared paths.

    The restriction of a stationary path on [-S, 0] to [-S/2, 0] is itself
    a valid stationary sample, so the half-window estimate can be coupled
    sample by sample; the returned delta isolates pure truncation error.
    """
    _require_white(spec)
    if window.N % 2 != 0:
        raise ValueError("window halving needs an even number of steps")
    fn = _state_fn(phi)
    coeff = engine.step_coefficients(spec, window.dt)
    half = window.N // 2

    vals = np.empty(m_samples)
    w_full = np.empty(m_samples)
    w_half = np.empty(m_samples)

    def chunk(start: int, count: int) -> None:
        h, db = engine.ou_batch(
            spec, coeff, window.N, seed, Role.STATIONARY, start, count,
            stationary_init=True,
        )
        sl = slice(start, start + count)
        w_full[sl] = _window_weights_batch(spec, drift, coeff, h, db)
        w_half[sl] = _window_weights_batch(
            spec, drift, coeff,
            np.ascontiguousarray(h[:, :, half:]),
            np.ascontiguousarray(db[:, :, half:]),
        )
        vals[sl] = fn(h[:, :, -1])

    engine.map_samples(m_samples, workers, chunk)
    full = make_estimate(vals * np.exp(w_full), weights=np.exp(w_full))
    delta_mean, delta_se = mean_se(vals * (np.exp(w_full) - np.exp(w_half)))
    return {
        "full": full,
        "delta_mean": delta_mean,
        "delta_se": delta_se,
        "within_one_se": abs(delta_mean) <= full.std_error,
    }


def long_run_oracle(
    spec: OperatorSpec,
    drift: DriftSpec,
    t_burn: float,
    t_avg: float,
    grid_dt: float,
    m_chains: int,
    phi,
    seed: int = 0,
    workers: int = 1,
) -> Estimate:
    """Ergodic-average oracle for the invariant measure.

    Simulates the drifted recursion from 0, discards the burn-in, and
    time-averages phi along each chain; the chain means are independent,
    which gives an honest standard error.  Requires a dissipative drift.
    """
    if not drift.dissipative:
        raise ValueError("long-run averaging needs the dissipative drift flag")
    drift.validate_against(spec)
    fn = _state_fn(phi)
    n_burn = int(round(t_burn / grid_dt))
    n_avg = int(round(t_avg / grid_dt))
    n_steps = n_burn + n_avg
    coeff = engine.step_coefficients(spec, grid_dt)
    semx = np.zeros((spec.d, n_steps))

    chain_means = np.empty(m_chains)

    def chunk(start: int, count: int) -> None:
        kpath = engine.direct_batch(
            spec, drift, coeff, semx, n_steps, seed, Role.LONG_RUN, start, count
        )
        tail = kpath[:, :, n_burn + 1 :]
        acc = np.empty((count, tail.shape[2]))
        for i in range(tail.shape[2]):
            acc[:, i] = fn(tail[:, :, i])
        chain_means[start : start + count] = acc.mean(axis=1)

    engine.map_samples(m_chains, workers, chunk)
    return make_estimate(chain_means)


@dataclass(frozen=True)
class DensityRatioPoint:
    x: float
    psi: float
    local_count: float


@dataclass(frozen=True)
class DensityRatioReport:
    points: List[DensityRatioPoint]
    bandwidth: float
    normalization: float


def density_ratio_estimate(
    spec: OperatorSpec,
    drift: DriftSpec,
    window: WindowGrid,
    eval_points,
    bandwidth: Optional[float],
    m_samples: int,
    seed: int = 0,
    workers: int = 1,
) -> DensityRatioReport:
    """Kernel regression of the window weight on the first coordinate at 0.

    The conditional expectation of rho given h_1(0) = x is the density of
    the drifted invariant measure's first marginal against the undrifted
    one; a Nadaraya-Watson estimate with a Gaussian kernel realizes it.
    Bandwidth defaults to Silverman's rule on h_1(0).  ``normalization``
    is a Monte Carlo estimate of int psi-hat d(mu) over fresh stationary
    draws, which should be 1.
    """
    _require_white(spec)
    eval_points = np.asarray(eval_points, dtype=float)
    sd1 = math.sqrt(0.5 / spec.eigenvalues[0])
    if np.any(np.abs(eval_points) > 3.0 * sd1):
        raise ValueError("evaluation points must stay within 3 stationary sds")
    coeff = engine.step_coefficients(spec, window.dt)

    x0 = np.empty(m_samples)
    logw = np.empty(m_samples)

    def chunk(start: int, count: int) -> None:
        h, db = engine.ou_batch(
            spec, coeff, window.N, seed, Role.DENSITY, start, count,
            stationary_init=True,
        )
        x0[start : start + count] = h[:, 0, -1]
        logw[start : start + count] = _window_weights_batch(spec, drift, coeff, h, db)

    engine.map_samples(m_samples, workers, chunk)
    rho = np.exp(logw)

    if not bandwidth or bandwidth <= 0.0:
        bandwidth = 1.06 * float(np.std(x0)) * m_samples ** (-0.2)

    def predict(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        psi = np.empty(points.size)
        counts = np.empty(points.size)
        for lo in range(0, points.size, 64):
            block = points[lo : lo + 64, None]
            k = np.exp(-0.5 * ((x0[None, :] - block) / bandwidth) ** 2)
            sk = k.sum(axis=1)
            psi[lo : lo + 64] = (k * rho).sum(axis=1) / sk
            counts[lo : lo + 64] = sk * sk / (k * k).sum(axis=1)
        return psi, counts

    psi_vals, counts = predict(eval_points)
    for pt, cnt in zip(eval_points, counts):
        if cnt < 50.0:
            warnings.warn(
                f"local effective count {cnt:.1f} < 50 at x = {pt:.3f}",
                RuntimeWarning,
                stacklevel=2,
            )

    # total-mass check against fresh draws from the undrifted marginal
    mu_draws = sd1 * normal_block(seed, Role.MU_SAMPLES, 1, 0, 4000)[:, 0]
    psi_mu, _ = predict(mu_draws)
    normalization = float(np.mean(psi_mu))

    return DensityRatioReport(
        points=[
            DensityRatioPoint(x=float(p), psi=float(v), local_count=float(c))
            for p, v, c in zip(eval_points, psi_vals, counts)
        ],
        bandwidth=float(bandwidth),
        normalization=normalization,
    )
