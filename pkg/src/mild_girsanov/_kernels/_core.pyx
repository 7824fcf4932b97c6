# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Monte Carlo kernels.

Loop-for-loop mirror of ``numpy_impl`` (same recursions, ascending-mode
inner sums, Kahan over steps).  Custom drifts (kind 3) are not supported
here; the dispatcher routes them to the NumPy backend.
"""

from libc.math cimport tanh, sqrt

import numpy as np


cdef inline double _drift1(int kind, double p0, double p1, double z) nogil:
    if kind == 0:
        return 0.0
    if kind == 1:
        return p0 * z
    return -p0 * tanh(p1 * z)


def ou_paths(double[::1] decay, double[::1] scale, double[::1] cov_q,
             double[::1] cond_sd, double sqrt_dt,
             double[:, :, ::1] z1, double[:, :, ::1] z2, double[:, ::1] h0,
             double[:, :, ::1] h, double[:, :, ::1] db):
    cdef Py_ssize_t nb = z1.shape[0], d = z1.shape[1], n = z1.shape[2]
    cdef Py_ssize_t b, j, k
    cdef double eta, hprev
    with nogil:
        for b in range(nb):
            for j in range(d):
                hprev = h0[b, j]
                h[b, j, 0] = hprev
                for k in range(n):
                    db[b, j, k] = sqrt_dt * z1[b, j, k]
                    eta = cov_q[j] * z1[b, j, k] + cond_sd[j] * z2[b, j, k]
                    hprev = decay[j] * hprev + scale[j] * eta
                    h[b, j, k + 1] = hprev


def drift_paths(double[::1] decay, double[::1] scale, double[::1] cov_q,
                double[::1] cond_sd, double sqrt_dt, double[::1] phi1dt,
                int kind, double p0, double p1, double[:, ::1] semx,
                double[:, :, ::1] z1, double[:, :, ::1] z2,
                double[:, :, ::1] kpath, fn=None):
    if kind == 3:
        raise NotImplementedError("custom drift needs the NumPy backend")
    cdef Py_ssize_t nb = z1.shape[0], d = z1.shape[1], n = z1.shape[2]
    cdef Py_ssize_t b, j, k
    cdef double eta, kprev, bval
    with nogil:
        for b in range(nb):
            for j in range(d):
                kprev = 0.0
                kpath[b, j, 0] = 0.0
                for k in range(n):
                    eta = cov_q[j] * z1[b, j, k] + cond_sd[j] * z2[b, j, k]
                    bval = _drift1(kind, p0, p1, kprev + semx[j, k])
                    kprev = decay[j] * kprev + phi1dt[j] * bval + scale[j] * eta
                    kpath[b, j, k + 1] = kprev


def gamma_paths(double[::1] decay, double[::1] phi1dt, int kind, double p0,
                double p1, double[:, ::1] semx, double[:, :, ::1] h,
                double[:, :, ::1] gam, double[:, :, ::1] f, fn=None):
    if kind == 3:
        raise NotImplementedError("custom drift needs the NumPy backend")
    cdef Py_ssize_t nb = h.shape[0], d = h.shape[1], n = f.shape[2]
    cdef Py_ssize_t b, j, k
    cdef double gprev, fval
    with nogil:
        for b in range(nb):
            for j in range(d):
                gprev = 0.0
                gam[b, j, 0] = 0.0
                for k in range(n):
                    fval = _drift1(kind, p0, p1, h[b, j, k] + semx[j, k])
                    f[b, j, k] = fval
                    gprev = decay[j] * gprev + phi1dt[j] * fval
                    gam[b, j, k + 1] = gprev


def ito_terms(double[:, :, ::1] vals, double[:, :, ::1] db, double[::1] w,
              double[::1] out):
    cdef Py_ssize_t nb = vals.shape[0], d = vals.shape[1], n = vals.shape[2]
    cdef Py_ssize_t b, j, k
    cdef double acc, comp, term, y, t
    with nogil:
        for b in range(nb):
            acc = 0.0
            comp = 0.0
            for k in range(n):
                term = 0.0
                for j in range(d):
                    term = term + (w[j] * vals[b, j, k]) * db[b, j, k]
                y = term - comp
                t = acc + y
                comp = (t - acc) - y
                acc = t
            out[b] = acc


def weight_terms(double[:, :, ::1] f, double[:, :, ::1] db, double[::1] w,
                 double dt, double[::1] cm, double[::1] ito):
    cdef Py_ssize_t nb = f.shape[0], d = f.shape[1], n = f.shape[2]
    cdef Py_ssize_t b, j, k
    cdef double acc_c, comp_c, acc_i, comp_i, qc, qi, wf, y, t
    with nogil:
        for b in range(nb):
            acc_c = 0.0
            comp_c = 0.0
            acc_i = 0.0
            comp_i = 0.0
            for k in range(n):
                qc = 0.0
                qi = 0.0
                for j in range(d):
                    wf = w[j] * f[b, j, k]
                    qc = qc + wf * wf
                    qi = qi + wf * db[b, j, k]
                y = qc - comp_c
                t = acc_c + y
                comp_c = (t - acc_c) - y
                acc_c = t
                y = qi - comp_i
                t = acc_i + y
                comp_i = (t - acc_i) - y
                acc_i = t
            cm[b] = dt * acc_c
            ito[b] = acc_i
