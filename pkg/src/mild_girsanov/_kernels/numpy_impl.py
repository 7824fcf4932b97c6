"""NumPy implementation of the hot Monte Carlo kernels.

Reference semantics for the compiled extension: same recursions, same
summation order (ascending modes, Kahan over time steps).  All arrays are
batched sample-major: z1, z2, db, f are (B, d, N); paths are (B, d, N+1).

Drift kinds are encoded as ints: 0 zero, 1 linear (p0 = c), 2 tanh
(p0 = m, p1 = a), 3 custom (callable ``fn`` on (B, d) arrays; this backend
only).
"""

from __future__ import annotations

import numpy as np

KIND_ZERO = 0
KIND_LINEAR = 1
KIND_TANH = 2
KIND_CUSTOM = 3


def _drift(kind, p0, p1, fn, z):
    if kind == KIND_ZERO:
        return np.zeros_like(z)
    if kind == KIND_LINEAR:
        return p0 * z
    if kind == KIND_TANH:
        return -p0 * np.tanh(p1 * z)
    return fn(z)


def ou_paths(decay, scale, cov_q, cond_sd, sqrt_dt, z1, z2, h0, h, db):
    """Exact-in-distribution OU recursion with coupled Brownian increments.

    Per mode j and step k:
        db  = sqrt(dt) z1
        eta = (cov/sqrt(dt)) z1 + cond_sd z2
        h_{k+1} = decay h_k + scale eta
    so the node marginals of h are exact and db are genuine increments of
    the driving Brownian motion.
    """
    n_steps = z1.shape[2]
    h[:, :, 0] = h0
    for k in range(n_steps):
        db[:, :, k] = sqrt_dt * z1[:, :, k]
        eta = cov_q * z1[:, :, k] + cond_sd * z2[:, :, k]
        h[:, :, k + 1] = decay * h[:, :, k] + scale * eta


def drift_paths(decay, scale, cov_q, cond_sd, sqrt_dt, phi1dt, kind, p0, p1,
                semx, z1, z2, kpath, fn=None):
    """Exponential-Euler simulation of the drifted mild path (noise on).

    kpath_{k+1} = decay kpath_k + phi1dt b(kpath_k + semx_k) + scale eta.
    ``semx`` holds e^{t_k A} x at the left nodes, shape (d, N).
    """
    n_steps = z1.shape[2]
    kpath[:, :, 0] = 0.0
    for k in range(n_steps):
        eta = cov_q * z1[:, :, k] + cond_sd * z2[:, :, k]
        bval = _drift(kind, p0, p1, fn, kpath[:, :, k] + semx[:, k])
        kpath[:, :, k + 1] = decay * kpath[:, :, k] + phi1dt * bval + scale * eta


def gamma_paths(decay, phi1dt, kind, p0, p1, semx, h, gam, f, fn=None):
    """Drift convolution along a given path, plus the drift record.

    gam_{k+1} = decay gam_k + phi1dt f_k with f_k = b(h_k + semx_k); the
    left-endpoint evaluation keeps the record adapted.
    """
    n_steps = f.shape[2]
    gam[:, :, 0] = 0.0
    for k in range(n_steps):
        f[:, :, k] = _drift(kind, p0, p1, fn, h[:, :, k] + semx[:, k])
        gam[:, :, k + 1] = decay * gam[:, :, k] + phi1dt * f[:, :, k]


def ito_terms(vals, db, w, out):
    """Left-endpoint Ito sums sum_k <w * vals_k, db_k> per sample.

    Ascending-mode inner sums, Kahan compensation over steps; NumPy keeps
    axis sums sequential below its pairwise blocksize, matching the C loop.
    """
    n_steps = vals.shape[2]
    acc = np.zeros(vals.shape[0])
    comp = np.zeros_like(acc)
    for k in range(n_steps):
        term = ((w * vals[:, :, k]) * db[:, :, k]).sum(axis=1)
        y = term - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
    out[:] = acc


def weight_terms(f, db, w, dt, cm, ito):
    """Squared drift-record norm and Ito sum of the record, per sample.

    cm  = dt sum_k |w f_k|^2     (left-endpoint quadrature)
    ito = sum_k <w f_k, db_k>
    """
    n_steps = f.shape[2]
    acc_c = np.zeros(f.shape[0])
    comp_c = np.zeros_like(acc_c)
    acc_i = np.zeros_like(acc_c)
    comp_i = np.zeros_like(acc_c)
    for k in range(n_steps):
        wf = w * f[:, :, k]
        qc = (wf * wf).sum(axis=1)
        qi = (wf * db[:, :, k]).sum(axis=1)
        y = qc - comp_c
        t = acc_c + y
        comp_c = (t - acc_c) - y
        acc_c = t
        y = qi - comp_i
        t = acc_i + y
        comp_i = (t - acc_i) - y
        acc_i = t
    cm[:] = dt * acc_c
    ito[:] = acc_i
