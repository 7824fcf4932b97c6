import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from mild_girsanov.paths import TimeGrid, sample_convolution
from mild_girsanov.spectral import (
    OperatorSpec,
    custom_drift,
    linear_drift,
    squares_operator,
    tanh_drift,
    zero_drift,
)
from mild_girsanov.streams import PathStream
from mild_girsanov.volterra import (
    DeterministicPath,
    cameron_martin_norm_sq,
    drift_convolution,
    drift_record,
    ito_integral,
    nilpotency_check,
    regularity_check,
    remove_drift,
    solve_mild,
)

from conftest import MASTER_SEED

ONE_MODE = OperatorSpec(eigenvalues=np.array([1.0]))


def _grid(n=256):
    return TimeGrid(T=1.0, N=n)


def test_zero_drift_convolution_is_zero(spec8, grid256):
    h = np.random.default_rng(0).standard_normal((8, 257))
    gam = drift_convolution(spec8, zero_drift(), np.zeros(8), h, grid256)
    assert np.all(gam.values == 0.0)
    assert gam.role == "gamma"


def test_constant_drive_convolution_exact():
    # b == 1 makes the left-endpoint record exact, so the recursion hits
    # the closed form 1 - e^{-t} on the nodes
    grid = _grid(64)
    drift = custom_drift(lambda z: np.ones_like(z), lipschitz_const=0.0, sup_bound=1.0)
    gam = drift_convolution(ONE_MODE, drift, np.zeros(1), np.zeros((1, 65)), grid)
    assert np.allclose(gam.values[0], -np.expm1(-grid.nodes), rtol=1e-13)
    assert gam.values[0, -1] == pytest.approx(0.6321205588285577, abs=1e-13)


def test_linear_drift_convolution_closed_form():
    # b(z) = c z with h = 0: the convolution reduces to c x t e^{-t} when
    # lam = 1, up to the O(dt) left-endpoint error
    grid = _grid(512)
    c, x = -0.5, 1.0
    gam = drift_convolution(ONE_MODE, linear_drift(c), np.array([x]), np.zeros((1, 513)), grid)
    t = grid.nodes
    assert np.abs(gam.values[0] - c * x * t * np.exp(-t)).max() <= 2e-3


def test_solve_mild_matches_ode_oracle():
    # k' = -k + c (k + e^{-t} x), k(0) = 0, solved at high resolution
    grid = _grid(512)
    c, x = -0.5, 1.0

    def rhs(t, y):
        return -y + c * (y + math.exp(-t) * x)

    sol = solve_ivp(rhs, (0.0, 1.0), [0.0], rtol=1e-10, atol=1e-12, dense_output=True)
    k = solve_mild(ONE_MODE, linear_drift(c), np.array([x]), np.zeros((1, 513)), grid)
    oracle = sol.sol(grid.nodes)[0]
    assert np.abs(k.values[0] - oracle).max() <= 2e-3
    # closed form of the same equation: e^{(c-1)t} - e^{-t}
    assert np.abs(oracle - (np.exp((c - 1.0) * grid.nodes) - np.exp(-grid.nodes))).max() <= 1e-9


def test_zero_drift_solve_is_identity(spec8, grid256, rng):
    h = rng.standard_normal((8, 257))
    k = solve_mild(spec8, zero_drift(), np.zeros(8), h, grid256)
    assert np.array_equal(k.values, h)
    g = remove_drift(spec8, zero_drift(), np.zeros(8), h, grid256)
    assert np.array_equal(g.values, h)


@pytest.mark.parametrize("make_drift", [
    lambda: linear_drift(-0.5),
    lambda: tanh_drift(0.5, 1.0, 8),
    lambda: custom_drift(lambda z: 0.2 * np.sin(z), lipschitz_const=0.2, sup_bound=0.2 * math.sqrt(8)),
])
def test_inverse_pairing_round_off(spec8, grid256, rng, make_drift):
    # the two marches share the quadrature, so they invert each other
    # exactly up to float associativity noise
    drift = make_drift()
    x = rng.standard_normal(8)
    for _ in range(5):
        h = rng.standard_normal((8, 257))
        k = solve_mild(spec8, drift, x, h, grid256)
        back = remove_drift(spec8, drift, x, k, grid256)
        scale = max(1.0, np.abs(k.values).max())
        assert np.abs(back.values - h).max() <= 16 * np.finfo(float).eps * scale
        g = remove_drift(spec8, drift, x, h, grid256)
        forth = solve_mild(spec8, drift, x, g, grid256)
        assert np.abs(forth.values - h).max() <= 16 * np.finfo(float).eps * scale


def test_cm_norm_zero():
    grid = _grid(32)
    rep = cameron_martin_norm_sq(ONE_MODE, grid, np.zeros((1, 33)), np.zeros((1, 33)))
    assert rep.direct_sq == 0.0 and rep.drift_l2_sq == 0.0 and rep.rel_gap == 0.0


def test_cm_norm_rejects_nonzero_start():
    grid = _grid(32)
    u = np.ones((1, 33))
    with pytest.raises(ValueError):
        cameron_martin_norm_sq(ONE_MODE, grid, u, np.zeros((1, 33)))


def test_cm_identity_constant_record():
    # f == 1 drives u(t) = 1 - e^{-t}; both estimators converge to T = 1
    drift = custom_drift(lambda z: np.ones_like(z), lipschitz_const=0.0, sup_bound=1.0)
    grid = _grid(1024)
    gam = drift_convolution(ONE_MODE, drift, np.zeros(1), np.zeros((1, 1025)), grid)
    rec = drift_record(ONE_MODE, drift, np.zeros(1), np.zeros((1, 1025)), grid)
    rep = cameron_martin_norm_sq(ONE_MODE, grid, gam, rec)
    assert rep.drift_l2_sq == pytest.approx(1.0, abs=1e-12)
    assert rep.direct_sq == pytest.approx(1.0, abs=5e-3)
    assert rep.rel_gap <= 5e-3


def test_cm_colored_scaling():
    # eps = 0.5, lam = 4, f == 1: record estimator gives lam^eps T = 2
    spec = OperatorSpec(eigenvalues=np.array([4.0]), epsilon=0.5)
    drift = custom_drift(lambda z: np.ones_like(z), lipschitz_const=0.0, sup_bound=1.0)
    grid = _grid(64)
    gam = drift_convolution(spec, drift, np.zeros(1), np.zeros((1, 65)), grid)
    rec = drift_record(spec, drift, np.zeros(1), np.zeros((1, 65)), grid)
    rep = cameron_martin_norm_sq(spec, grid, gam, rec)
    assert rep.drift_l2_sq == pytest.approx(2.0, abs=1e-12)


def test_cm_identity_gap_halves(spec8):
    drift = tanh_drift(0.5, 1.0, 8)
    x = np.zeros(8)
    gaps = {}
    for n in (128, 256, 512):
        grid = _grid(n)
        h = np.vstack([np.sin(np.pi * grid.nodes) + 0.3 * np.cos(2 * np.pi * grid.nodes)] * 8)
        h[:, 0] = 0.0
        gam = drift_convolution(spec8, drift, x, h, grid)
        rec = drift_record(spec8, drift, x, h, grid)
        gaps[n] = cameron_martin_norm_sq(spec8, grid, gam, rec).rel_gap
    assert gaps[128] <= 1.0 / 128
    assert 1.5 <= gaps[128] / gaps[256] <= 3.0
    assert 1.5 <= gaps[256] / gaps[512] <= 3.0


def test_ito_zero_integrand(spec8, grid256):
    s = sample_convolution(spec8, grid256, PathStream(seed=2))
    path = DeterministicPath(np.zeros((8, 257)), role="gamma")
    assert ito_integral(path, s, spec8) == 0.0


def test_ito_constant_integrand_moments(spec8, grid256):
    # I = <c, B(T)>: mean 0, variance |c|^2 T over many samples
    c = np.arange(1.0, 9.0) / 8.0
    path = DeterministicPath(np.tile(c[:, None], (1, 257)), role="h")
    m = 4000
    vals = np.empty(m)
    for i in range(m):
        s = sample_convolution(spec8, grid256, PathStream(seed=MASTER_SEED, index=i))
        vals[i] = ito_integral(path, s, spec8)
    var_expected = float(np.sum(c * c))
    assert abs(vals.mean()) <= 4.0 * math.sqrt(var_expected / m)
    se_var = math.sqrt(2.0 / (m - 1)) * var_expected
    assert abs(vals.var(ddof=1) - var_expected) <= 4.0 * se_var


def test_ito_deterministic_increments_reduce_to_quadrature(spec8, grid256):
    # db == dt in every slot turns the sum into plain quadrature
    s = sample_convolution(spec8, grid256, PathStream(seed=3))
    forced = type(s)(h=s.h, db=np.full_like(s.db, grid256.dt), seed=s.seed)
    path = DeterministicPath(s.h, role="h")
    expected = grid256.dt * float(np.sum(s.h[:, :-1]))
    assert ito_integral(path, forced, spec8) == pytest.approx(expected, rel=1e-12)


def test_ito_grid_mismatch_rejected(spec8, grid256):
    s = sample_convolution(spec8, grid256, PathStream(seed=4))
    with pytest.raises(ValueError):
        ito_integral(DeterministicPath(np.zeros((8, 100)), role="h"), s, spec8)


def test_ito_causality(spec8):
    # replacing increments beyond t_m only changes terms with k >= m
    grid = TimeGrid(T=1.0, N=64)
    drift = tanh_drift(0.5, 1.0, 8)
    s = sample_convolution(spec8, grid, PathStream(seed=11))
    gam = drift_convolution(spec8, drift, np.zeros(8), s.h, grid)
    m_cut = 32
    fresh = sample_convolution(spec8, grid, PathStream(seed=12))
    db_mix = s.db.copy()
    db_mix[:, m_cut:] = fresh.db[:, m_cut:]
    mixed = type(s)(h=s.h, db=db_mix, seed=s.seed)
    head = type(s)(h=s.h, db=np.concatenate([s.db[:, :m_cut], np.zeros((8, 32))], axis=1), seed=s.seed)
    head_mixed = type(s)(h=s.h, db=np.concatenate([db_mix[:, :m_cut], np.zeros((8, 32))], axis=1), seed=s.seed)
    # the head contributions agree exactly; only the tail differs
    assert ito_integral(gam, head, spec8) == ito_integral(gam, head_mixed, spec8)
    assert ito_integral(gam, mixed, spec8) != ito_integral(gam, s, spec8)


def test_deterministic_path_roles():
    with pytest.raises(ValueError):
        DeterministicPath(np.ones((2, 5)), role="gamma")
    DeterministicPath(np.ones((2, 5)), role="f")


def test_nilpotency_zero_drift_jacobian_vanishes():
    spec = squares_operator(2)
    rep = nilpotency_check(spec, linear_drift(0.0), np.zeros(2), TimeGrid(1.0, 8))
    assert rep.max_upper_entry == 0.0
    assert rep.max_nilpotent_norm == 0.0


@pytest.mark.parametrize("drift", [linear_drift(-0.5), tanh_drift(0.5, 1.0, 4)])
def test_nilpotency_strict_causality(drift):
    spec = squares_operator(4)
    rep = nilpotency_check(spec, drift, np.ones(4) * 0.3, TimeGrid(1.0, 16), probe_count=2, seed=MASTER_SEED)
    assert rep.max_upper_entry <= 1e-6
    assert rep.max_nilpotent_norm <= 1e-12
    assert rep.max_abs_eigenvalue <= 1e-8
    assert rep.det2 == pytest.approx(1.0, abs=1e-10)


def test_nilpotency_rejects_large_probe():
    spec = squares_operator(8)
    with pytest.raises(ValueError):
        nilpotency_check(spec, linear_drift(-0.5), np.zeros(8), TimeGrid(1.0, 16))


def test_regularity_zero_input(spec8, grid256):
    rep = regularity_check(spec8, grid256, np.zeros((8, 257)))
    assert rep.deriv_norm == 0.0 and rep.op_norm == 0.0 and rep.f_norm == 0.0
    assert rep.deriv_ok and rep.op_ok


def test_regularity_constant_drive_value():
    grid = _grid(1024)
    rep = regularity_check(ONE_MODE, grid, np.ones((1, 1025)))
    # |A u|^2 integrates (1 - e^{-t})^2 over [0, 1]
    assert rep.op_norm**2 == pytest.approx(0.16809124072457832, abs=5e-4)
    assert rep.op_ok and rep.deriv_ok


def test_regularity_random_suite(spec8, rng):
    grid = _grid(128)
    t = grid.nodes
    for _ in range(200):
        coef = rng.standard_normal((8, 3))
        f = coef[:, [0]] + coef[:, [1]] * np.sin(np.pi * t) + coef[:, [2]] * np.cos(2 * np.pi * t)
        rep = regularity_check(spec8, grid, f)
        assert rep.deriv_ok and rep.op_ok
