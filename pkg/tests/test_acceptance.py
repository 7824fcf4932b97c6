"""Acceptance suite: every contracted criterion at its stated tolerance.

One test per criterion; each prints a pass/fail line that the terminal
summary collects.  Sizes are the contract defaults (d = 8, N = 256,
M = 20000 unless a criterion states otherwise) and the master seed is
pre-registered in conftest, which makes the whole suite deterministic.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

import conftest
from conftest import MASTER_SEED

from mild_girsanov import engine
from mild_girsanov._budget import bias_budget
from mild_girsanov.closed_form import (
    gaussian_density_ratio_1d,
    ou_terminal_mean,
    ou_terminal_variance,
    stationary_variance,
)
from mild_girsanov.estimators import direct_values, moment_bound_suite, weighted_values
from mild_girsanov.functionals import PATH_FUNCTIONALS
from mild_girsanov.paths import (
    TimeGrid,
    empirical_covariance_check,
    inverse_covariance_residual,
    sobolev_moment_bound,
)
from mild_girsanov.spectral import (
    OperatorSpec,
    linear_drift,
    squares_operator,
    tanh_drift,
    zero_drift,
)
from mild_girsanov.stationary import (
    WindowGrid,
    density_ratio_estimate,
    invariant_estimate,
    invariant_window_delta,
    long_run_oracle,
)
from mild_girsanov.stats import make_estimate, mean_se
from mild_girsanov.streams import Role
from mild_girsanov.volterra import (
    cameron_martin_norm_sq,
    drift_convolution,
    drift_record,
    nilpotency_check,
    regularity_check,
)

D = 8
GRID = TimeGrid(T=1.0, N=256)
M = 20000
WORKERS = 2

DRIFTS = {
    "zero": zero_drift(),
    "linear": linear_drift(-0.5),
    "tanh": tanh_drift(0.5, 1.0, D),
}
X_VECTORS = {"0": np.zeros(D), "e1": np.eye(D)[0]}
EPSILONS = (0.0, 0.5)

_cells: dict = {}


def _record(num: int, desc: str, ok: bool, detail: str = "") -> None:
    line = f"criterion {num:02d} [{desc}]: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    conftest.ACCEPTANCE_LOG.append(line)
    print(line)
    assert ok, line


def _cell(kind: str, x_tag: str, eps: float):
    """One matrix cell: per-sample functional values and log weights."""
    key = (kind, x_tag, eps)
    if key not in _cells:
        spec = squares_operator(D, epsilon=eps)
        drift = DRIFTS[kind]
        x = X_VECTORS[x_tag]
        w_vals, logw = weighted_values(
            spec, drift, x, GRID, dict(PATH_FUNCTIONALS), M, MASTER_SEED, WORKERS
        )
        d_vals = direct_values(
            spec, drift, x, GRID, dict(PATH_FUNCTIONALS), M, MASTER_SEED, WORKERS
        )
        _cells[key] = (spec, drift, x, w_vals, logw, d_vals)
    return _cells[key]


def test_criterion_01_girsanov_identity():
    """Weighted and direct estimates agree for the whole matrix."""
    worst = 0.0
    for kind in DRIFTS:
        for x_tag in X_VECTORS:
            for eps in EPSILONS:
                spec, drift, x, w_vals, logw, d_vals = _cell(kind, x_tag, eps)
                rho = np.exp(logw)
                if kind == "zero":
                    assert float(np.abs(logw).max()) == 0.0
                for name in PATH_FUNCTIONALS:
                    w_est = make_estimate(w_vals[name] * rho, weights=rho)
                    d_est = make_estimate(d_vals[name])
                    budget = 3.0 * math.hypot(w_est.std_error, d_est.std_error)
                    budget += bias_budget(kind, GRID.dt)
                    gap = abs(w_est.value - d_est.value)
                    worst = max(worst, gap / budget)
                    if gap > budget:
                        _record(
                            1, "mild change-of-measure identity", False,
                            f"{kind}/{x_tag}/eps={eps}/{name}: gap {gap:.3e} > {budget:.3e}",
                        )
    _record(1, "mild change-of-measure identity", True, f"worst gap/budget {worst:.2f}")


def test_criterion_02_weight_normalization():
    worst = 0.0
    for kind in DRIFTS:
        for x_tag in X_VECTORS:
            for eps in EPSILONS:
                _, _, _, _, logw, _ = _cell(kind, x_tag, eps)
                mean, se = mean_se(np.exp(logw))
                dev = abs(mean - 1.0)
                if kind == "zero":
                    ok = dev == 0.0
                else:
                    ok = dev <= 3.0 * se
                    worst = max(worst, dev / (3.0 * se))
                if not ok:
                    _record(2, "weight normalization", False, f"{kind}/{x_tag}/{eps}: {mean:.5f} +- {se:.5f}")
    _record(2, "weight normalization", True, f"worst dev/(3 se) {worst:.2f}")


def test_criterion_03_analytic_ou_oracle():
    worst = 0.0
    for x_tag in X_VECTORS:
        for eps in EPSILONS:
            spec, drift, x, w_vals, logw, d_vals = _cell("linear", x_tag, eps)
            rho = np.exp(logw)
            mean_o = float(ou_terminal_mean(spec, drift.c, x, GRID.T)[0])
            second_o = mean_o**2 + float(ou_terminal_variance(spec, drift.c, GRID.T)[0])
            pairs = [
                (make_estimate(w_vals["terminal_coord"] * rho, weights=rho), mean_o),
                (make_estimate(d_vals["terminal_coord"]), mean_o),
                (make_estimate(w_vals["terminal_coord"] ** 2 * rho, weights=rho), second_o),
                (make_estimate(d_vals["terminal_coord"] ** 2), second_o),
            ]
            for est, oracle in pairs:
                tol = 3.0 * est.std_error + bias_budget("linear", GRID.dt)
                dev = abs(est.value - oracle)
                worst = max(worst, dev / tol)
                if dev > tol:
                    _record(3, "closed-form OU oracle", False, f"{x_tag}/{eps}: {est.value:.5f} vs {oracle:.5f}")
    _record(3, "closed-form OU oracle", True, f"worst dev/tol {worst:.2f}")


def test_criterion_04_weight_moment_bounds():
    spec = squares_operator(D)
    drift = tanh_drift(0.5 / math.sqrt(D), 1.0, D)
    assert drift.sup_bound == pytest.approx(0.5)
    rep = moment_bound_suite(spec, drift, np.zeros(D), GRID, [2, 3], M, MASTER_SEED, WORKERS)
    ok = all(row.ok for row in rep.rows) and rep.ito_ok
    detail = (
        f"E[rho^2]={rep.rows[0].moment:.4f}<=1.6487, "
        f"E[rho^3]={rep.rows[1].moment:.4f}<=4.4817, "
        f"E[I^2]={rep.ito_second_moment:.4f}<=0.125"
    )
    _record(4, "weight moment bounds", ok, detail)


def test_criterion_05_kernel_and_inverse():
    spec = OperatorSpec(eigenvalues=np.array([1.0, 4.0]))
    grid = TimeGrid(T=1.0, N=64)
    cov = empirical_covariance_check(spec, grid, 200000, seed=MASTER_SEED, workers=WORKERS)
    ok_cov = cov.max_sigma <= 4.0 and cov.cross_mode_max_sigma <= 4.0

    res = {}
    for n in (256, 512):
        g = TimeGrid(T=1.0, N=n)
        h = np.vstack([np.sin(np.pi * g.nodes)] * 2)
        res[n] = inverse_covariance_residual(spec, g, h)
    ratio = res[256].rel_residual / res[512].rel_residual
    t_ratio = res[256].defect_terminal / res[512].defect_terminal
    ok_bvp = (
        res[256].rel_residual <= 1e-2
        and ratio >= 3.5
        and res[256].defect_origin == 0.0
        and 1.3 <= t_ratio <= 3.0
    )
    _record(
        5, "covariance kernel and its inverse", ok_cov and ok_bvp,
        f"cov {cov.max_sigma:.2f} sigma; residual {res[256].rel_residual:.2e}, halving x{ratio:.2f}",
    )


def test_criterion_06_sobolev_moment_bound():
    spec = squares_operator(D, beta=0.25)
    rep = sobolev_moment_bound(spec, GRID, 10000, seed=MASTER_SEED, workers=WORKERS)
    ok_bound = rep.lhs.value <= rep.rhs + 3.0 * rep.lhs.std_error

    one = OperatorSpec(eigenvalues=np.array([1.0]), beta=1.0)
    rep1 = sobolev_moment_bound(one, GRID, 10000, seed=MASTER_SEED, workers=WORKERS)
    exact = 0.2838338208091532
    ok_exact = abs(rep1.lhs.value - exact) <= 3.0 * rep1.lhs.std_error and rep1.rhs == 0.5
    _record(
        6, "Sobolev moment bound", ok_bound and ok_exact,
        f"lhs {rep.lhs.value:.4f} <= {rep.rhs:.4f}; one-mode {rep1.lhs.value:.5f} vs {exact:.5f}",
    )


def test_criterion_07_norm_identity_gap():
    spec = squares_operator(D)
    drift = DRIFTS["tanh"]
    x = X_VECTORS["e1"]
    gaps = {}
    for n in (256, 512, 1024):
        g = TimeGrid(T=1.0, N=n)
        h = np.vstack([np.sin(np.pi * g.nodes) + 0.3 * np.cos(2 * np.pi * g.nodes)] * D)
        h[:, 0] = 0.0
        gam = drift_convolution(spec, drift, x, h, g)
        rec = drift_record(spec, drift, x, h, g)
        gaps[n] = cameron_martin_norm_sq(spec, g, gam, rec).rel_gap
    r1 = gaps[256] / gaps[512]
    r2 = gaps[512] / gaps[1024]
    ok = gaps[256] <= GRID.dt and 1.5 <= r1 <= 3.0 and 1.5 <= r2 <= 3.0
    _record(7, "norm-identity gap O(dt)", ok, f"gap {gaps[256]:.2e}, ratios {r1:.2f}/{r2:.2f}")


def test_criterion_08_ito_isometry():
    spec = squares_operator(D)
    drift = DRIFTS["tanh"]
    m = 10000
    coeff = engine.step_coefficients(spec, GRID.dt)
    semx = engine.semigroup_profile(spec, np.zeros(D), GRID.nodes[:-1])
    itg = np.empty(m)
    quad = np.empty(m)

    def chunk(start, count):
        h, db = engine.ou_batch(spec, coeff, GRID.N, MASTER_SEED, Role.ISOMETRY, start, count)
        gam, _ = engine.gamma_batch(spec, drift, coeff, semx, h)
        itg[start : start + count] = engine.ito_batch(coeff, gam[:, :, :-1], db)
        quad[start : start + count] = GRID.dt * np.sum(gam[:, :, :-1] ** 2, axis=(1, 2))

    engine.map_samples(m, WORKERS, chunk)
    var_i = float(np.var(itg, ddof=1))
    q_mean, q_se = mean_se(quad)
    var_se = float(np.std(itg**2, ddof=1)) / math.sqrt(m)
    tol = 4.0 * math.hypot(q_se, var_se)
    ok = abs(var_i - q_mean) <= tol
    _record(8, "Ito isometry", ok, f"Var(I) {var_i:.5f} vs E[quad] {q_mean:.5f} +- {tol:.5f}")


def test_criterion_09_jacobian_nilpotency():
    spec = squares_operator(4)
    grid = TimeGrid(T=1.0, N=32)
    worst_upper = 0.0
    worst_power = 0.0
    worst_det = 0.0
    for drift in (linear_drift(-0.5), tanh_drift(0.5, 1.0, 4)):
        rep = nilpotency_check(spec, drift, 0.3 * np.ones(4), grid, probe_count=2, seed=MASTER_SEED)
        worst_upper = max(worst_upper, rep.max_upper_entry)
        worst_power = max(worst_power, rep.max_nilpotent_norm)
        worst_det = max(worst_det, abs(rep.det2 - 1.0))
    ok = worst_upper <= 1e-6 and worst_power <= 1e-12 and worst_det <= 1e-10
    _record(
        9, "Jacobian strictly causal, det2 = 1", ok,
        f"upper {worst_upper:.1e}, J^N {worst_power:.1e}, |det2-1| {worst_det:.1e}",
    )


def test_criterion_10_maximal_regularity():
    spec = squares_operator(D)
    grid = TimeGrid(T=1.0, N=256)
    rng = np.random.default_rng(MASTER_SEED)
    t = grid.nodes
    ok_all = True
    for _ in range(1000):
        coef = rng.standard_normal((D, 3))
        f = coef[:, [0]] + coef[:, [1]] * np.sin(np.pi * t) + coef[:, [2]] * np.cos(2 * np.pi * t)
        rep = regularity_check(spec, grid, f)
        ok_all = ok_all and rep.deriv_ok and rep.op_ok

    one = OperatorSpec(eigenvalues=np.array([1.0]))
    fine = TimeGrid(T=1.0, N=1024)
    val = regularity_check(one, fine, np.ones((1, 1025))).op_norm ** 2
    # the closed form evaluates to 0.168091; match to three significant digits
    ok_val = round(val, 3) == 0.168 and val <= 1.0
    _record(10, "maximal regularity", ok_all and ok_val, f"constant-drive energy {val:.6f}")


def test_criterion_11_invariant_measure():
    spec = squares_operator(4)
    window = WindowGrid(S=8.0, N=256)
    details = []

    est = invariant_estimate(spec, zero_drift(), window, lambda z: z[:, 0] ** 2, M, MASTER_SEED, WORKERS)
    ok = abs(est.value - 0.5) <= 3.0 * est.std_error
    details.append(f"mu {est.value:.4f}")

    drift = linear_drift(-1.0)
    oracle = stationary_variance(spec, -1.0)
    for j in range(4):
        estj = invariant_estimate(
            spec, drift, window, lambda z, j=j: z[:, j] ** 2, M, MASTER_SEED + j, WORKERS
        )
        tol = 3.0 * estj.std_error + bias_budget("linear", window.dt) * oracle[j]
        ok = ok and abs(estj.value - oracle[j]) <= tol
    details.append("linear modes ok")

    tanh4 = tanh_drift(0.5, 1.0, 4)
    inv = invariant_estimate(spec, tanh4, window, lambda z: z[:, 0] ** 2, M, MASTER_SEED, WORKERS)
    lro = long_run_oracle(spec, tanh4, 8.0, 48.0, window.dt, 64, lambda z: z[:, 0] ** 2, MASTER_SEED, WORKERS)
    gap = abs(inv.value - lro.value)
    tol = 3.0 * math.hypot(inv.std_error, lro.std_error) + bias_budget("tanh", window.dt)
    ok = ok and gap <= tol
    details.append(f"tanh gap {gap:.4f} <= {tol:.4f}")

    delta = invariant_window_delta(spec, tanh4, window, lambda z: z[:, 0] ** 2, M, MASTER_SEED, WORKERS)
    ok = ok and delta["within_one_se"]
    details.append(f"window delta {delta['delta_mean']:.1e} < se {delta['full'].std_error:.1e}")
    _record(11, "invariant-measure representation", ok, "; ".join(details))


def test_criterion_12_density_ratio():
    spec = OperatorSpec(eigenvalues=np.array([1.0]))
    window = WindowGrid(S=8.0, N=256)
    drift = linear_drift(-0.5)
    sd = math.sqrt(0.5)
    pts = np.linspace(-2.0 * sd, 2.0 * sd, 9)
    rep = density_ratio_estimate(spec, drift, window, pts, None, 100000, MASTER_SEED, WORKERS)
    psi = np.array([p.psi for p in rep.points])
    oracle = gaussian_density_ratio_1d(pts, 1.0 / 3.0, 0.5)
    worst = float(np.max(np.abs(psi - oracle) / oracle))
    ok = worst <= 0.10 and abs(rep.normalization - 1.0) <= 0.05
    _record(
        12, "invariant density ratio", ok,
        f"worst rel dev {worst:.3f}, mass {rep.normalization:.4f}",
    )


def test_criterion_13_worker_determinism():
    spec, drift, x, _, _, _ = _cell("tanh", "0", 0.0)
    runs = {}
    for workers in (1, 3):
        w_vals, logw = weighted_values(
            spec, drift, x, GRID, {"phi": PATH_FUNCTIONALS["terminal_sqnorm"]},
            4000, MASTER_SEED, workers,
        )
        rho = np.exp(logw)
        runs[workers] = make_estimate(w_vals["phi"] * rho, weights=rho)
    ok = runs[1] == runs[3]

    inv1 = invariant_estimate(
        squares_operator(4), tanh_drift(0.5, 1.0, 4), WindowGrid(S=8.0, N=128),
        lambda z: z[:, 0] ** 2, 4000, MASTER_SEED, 1,
    )
    inv2 = invariant_estimate(
        squares_operator(4), tanh_drift(0.5, 1.0, 4), WindowGrid(S=8.0, N=128),
        lambda z: z[:, 0] ** 2, 4000, MASTER_SEED, 4,
    )
    ok = ok and inv1 == inv2
    _record(13, "bit-identical across worker counts", ok)
