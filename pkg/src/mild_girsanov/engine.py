"""Batched sampling and weight machinery shared by all Monte Carlo modules.

This is the glue between the counter-based streams, the kernel backends and
the statistical front ends: per-step Gaussian coefficients (with a series
branch for small lam*dt), stream layouts, and chunked, optionally threaded
batch evaluation whose per-sample results never depend on chunking or on
the worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from . import _kernels
from ._kernels import numpy_impl
from .spectral import DriftSpec, OperatorSpec
from .streams import normal_block

__all__ = [
    "StepCoefficients",
    "step_coefficients",
    "semigroup_profile",
    "ou_batch",
    "direct_batch",
    "gamma_batch",
    "weight_batch",
    "ito_batch",
    "map_samples",
    "CHUNK",
]

CHUNK = 512

# below this lam*dt the direct conditional-variance formula cancels badly
_SERIES_THRESHOLD = 1e-2


class NonPositiveCovarianceError(RuntimeError):
    """The per-step 2x2 Gaussian covariance came out numerically non-PSD."""


@dataclass(frozen=True)
class StepCoefficients:
    """Per-mode coefficients of one exact OU step of width dt.

    decay    = e^(-lam dt)
    var_eta  = (1 - e^(-2 lam dt)) / (2 lam)   variance of the convolution
               innovation eta
    cov      = (1 - e^(-lam dt)) / lam         Cov(dB, eta); also equals
               dt * phi1(lam dt), the exponential-Euler drift weight
    cond_sd  = sqrt(var_eta - cov^2 / dt)      conditional sd of eta given dB
    scale    = lam^(-eps/2)                    colour factor on the noise
    w_eps    = lam^(eps/2)                     colour factor on the drift
    """

    dt: float
    sqrt_dt: float
    decay: np.ndarray
    var_eta: np.ndarray
    cov: np.ndarray
    cov_q: np.ndarray
    cond_sd: np.ndarray
    phi1dt: np.ndarray
    scale: np.ndarray
    w_eps: np.ndarray


def step_coefficients(spec: OperatorSpec, dt: float) -> StepCoefficients:
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    lam = spec.eigenvalues
    a = lam * dt
    decay = np.exp(-a)
    var_eta = -np.expm1(-2.0 * a) / (2.0 * lam)
    cov = -np.expm1(-a) / lam
    # conditional variance of eta given dB; direct subtraction loses digits
    # when a is small, so switch to the Taylor expansion in a
    cond_var = np.where(
        a < _SERIES_THRESHOLD,
        dt * a * a * (1.0 / 12.0 - a / 12.0 + 17.0 * a * a / 360.0),
        var_eta - cov * cov / dt,
    )
    if np.any(cond_var < 0.0):
        raise NonPositiveCovarianceError(
            "per-step (dB, eta) covariance is numerically non-PSD; "
            f"min conditional variance {cond_var.min():.3e}"
        )
    eps = spec.epsilon
    return StepCoefficients(
        dt=dt,
        sqrt_dt=float(np.sqrt(dt)),
        decay=decay,
        var_eta=var_eta,
        cov=cov,
        cov_q=cov / np.sqrt(dt),
        cond_sd=np.sqrt(cond_var),
        phi1dt=cov.copy(),
        scale=lam ** (-0.5 * eps) if eps != 0.0 else np.ones_like(lam),
        w_eps=lam ** (0.5 * eps) if eps != 0.0 else np.ones_like(lam),
    )


def semigroup_profile(spec: OperatorSpec, x: np.ndarray, times: np.ndarray) -> np.ndarray:
    """e^{t A} x evaluated at the given times, shape (d, len(times))."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.d,):
        raise ValueError(f"x must have shape ({spec.d},), got {x.shape}")
    return np.exp(-np.outer(spec.eigenvalues, times)) * x[:, None]


def _impl_for(drift: Optional[DriftSpec]):
    if drift is not None and drift.kind == "custom":
        return numpy_impl
    return _kernels.active


def _kind_params(drift: DriftSpec) -> Tuple[int, float, float, Optional[Callable]]:
    if drift.kind == "zero":
        return numpy_impl.KIND_ZERO, 0.0, 0.0, None
    if drift.kind == "linear":
        return numpy_impl.KIND_LINEAR, drift.c, 0.0, None
    if drift.kind == "tanh":
        return numpy_impl.KIND_TANH, drift.m, drift.a, None
    return numpy_impl.KIND_CUSTOM, 0.0, 0.0, drift.fn


def _split_normals(z: np.ndarray, d: int, n_steps: int, with_init: bool):
    count = z.shape[0]
    z1 = np.ascontiguousarray(z[:, : d * n_steps].reshape(count, d, n_steps))
    z2 = np.ascontiguousarray(
        z[:, d * n_steps : 2 * d * n_steps].reshape(count, d, n_steps)
    )
    zi = z[:, 2 * d * n_steps :] if with_init else None
    return z1, z2, zi


def normals_per_sample(d: int, n_steps: int, with_init: bool = False) -> int:
    return 2 * d * n_steps + (d if with_init else 0)


def ou_batch(
    spec: OperatorSpec,
    coeff: StepCoefficients,
    n_steps: int,
    seed: int,
    role: int,
    start: int,
    count: int,
    stationary_init: bool = False,
) -> Tuple[np.ndarray, np.ndarray]:
    """Sample ``count`` convolution paths jointly with driving increments.

    Returns (h, db) of shapes (count, d, N+1) and (count, d, N).  With
    ``stationary_init`` the first node is drawn from the per-mode
    stationary marginal N(0, lam^(-1-eps)/2) instead of starting at 0.
    """
    d = spec.d
    n = normals_per_sample(d, n_steps, stationary_init)
    z = normal_block(seed, role, n, start, count)
    z1, z2, zi = _split_normals(z, d, n_steps, stationary_init)
    h = np.empty((count, d, n_steps + 1))
    db = np.empty((count, d, n_steps))
    if stationary_init:
        sd0 = np.sqrt(spec.eigenvalues ** (-1.0 - spec.epsilon) / 2.0)
        h0 = np.ascontiguousarray(zi * sd0)
    else:
        h0 = np.zeros((count, d))
    _kernels.active.ou_paths(
        coeff.decay, coeff.scale, coeff.cov_q, coeff.cond_sd, coeff.sqrt_dt,
        z1, z2, h0, h, db,
    )
    return h, db


def direct_batch(
    spec: OperatorSpec,
    drift: DriftSpec,
    coeff: StepCoefficients,
    semx: np.ndarray,
    n_steps: int,
    seed: int,
    role: int,
    start: int,
    count: int,
) -> np.ndarray:
    """Simulate the drifted mild recursion; returns paths (count, d, N+1)."""
    d = spec.d
    n = normals_per_sample(d, n_steps)
    z = normal_block(seed, role, n, start, count)
    z1, z2, _ = _split_normals(z, d, n_steps, False)
    kpath = np.empty((count, d, n_steps + 1))
    kind, p0, p1, fn = _kind_params(drift)
    impl = _impl_for(drift)
    impl.drift_paths(
        coeff.decay, coeff.scale, coeff.cov_q, coeff.cond_sd, coeff.sqrt_dt,
        coeff.phi1dt, kind, p0, p1, np.ascontiguousarray(semx), z1, z2,
        kpath, fn=fn,
    )
    return kpath


def gamma_batch(
    spec: OperatorSpec,
    drift: DriftSpec,
    coeff: StepCoefficients,
    semx: np.ndarray,
    h: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Drift convolution and drift record along given paths (batched)."""
    count, d, n_nodes = h.shape
    gam = np.empty((count, d, n_nodes))
    f = np.empty((count, d, n_nodes - 1))
    kind, p0, p1, fn = _kind_params(drift)
    impl = _impl_for(drift)
    impl.gamma_paths(
        coeff.decay, coeff.phi1dt, kind, p0, p1,
        np.ascontiguousarray(semx), np.ascontiguousarray(h), gam, f, fn=fn,
    )
    return gam, f


def weight_batch(
    coeff: StepCoefficients, f: np.ndarray, db: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """(cm, ito) per sample from the drift record and driving increments."""
    count = f.shape[0]
    cm = np.empty(count)
    ito = np.empty(count)
    _kernels.active.weight_terms(
        np.ascontiguousarray(f), np.ascontiguousarray(db), coeff.w_eps,
        coeff.dt, cm, ito,
    )
    return cm, ito


def ito_batch(coeff: StepCoefficients, vals: np.ndarray, db: np.ndarray) -> np.ndarray:
    """Adapted Ito sums sum_k <lam^(eps/2) vals_k, db_k> per sample."""
    out = np.empty(vals.shape[0])
    _kernels.active.ito_terms(
        np.ascontiguousarray(vals), np.ascontiguousarray(db), coeff.w_eps, out
    )
    return out


def map_samples(total: int, workers: int, chunk_fn: Callable[[int, int], None]) -> None:
    """Run chunk_fn(start, count) over [0, total) in fixed chunks.

    Per-sample results must be written to disjoint preallocated slices, so
    scheduling order cannot affect the outcome.
    """
    spans = [(s, min(CHUNK, total - s)) for s in range(0, total, CHUNK)]
    if workers <= 1 or len(spans) <= 1:
        for s, c in spans:
            chunk_fn(s, c)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(chunk_fn, s, c) for s, c in spans]
        for fut in futures:
            fut.result()
