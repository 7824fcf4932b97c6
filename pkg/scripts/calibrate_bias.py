#!/usr/bin/env python3
"""Calibrate the per-drift discretization-bias budgets.

Measures |E[estimate(N)] - oracle or reference| / dt over the comparison
matrix at N in {64, 128, 256}, using refinement-coupled sampling so the
bias differences are resolved far below the raw Monte Carlo noise.  The
worst ratio per drift kind, doubled for safety, is written into
src/mild_girsanov/_budget.py.

Run from the repository root:  python3 scripts/calibrate_bias.py [--write]
"""

from __future__ import annotations

import argparse
import math
import re
from pathlib import Path

import numpy as np

from mild_girsanov import engine
from mild_girsanov.closed_form import ou_terminal_mean, ou_terminal_variance
from mild_girsanov.spectral import drift_eval, linear_drift, squares_operator, tanh_drift
from mild_girsanov.stats import mean_se
from mild_girsanov.streams import Role

SEED = 915274
M = 40000
N_LIST = (64, 128, 256)
N_REF = 1024
T_END = 1.0


def coupled_values(spec, drift, x, eps_tag):
    """Per-sample terminal coord / sqnorm for both estimators at each N."""
    all_n = list(N_LIST) + [N_REF]
    coeff_ref = engine.step_coefficients(spec, T_END / N_REF)
    coeffs = {n: engine.step_coefficients(spec, T_END / n) for n in all_n}
    nodes = {n: np.linspace(0.0, T_END, n + 1) for n in all_n}
    semx = {n: engine.semigroup_profile(spec, x, nodes[n]) for n in all_n}

    out = {
        (kind, n): np.empty(M)
        for kind in ("w1", "w2", "d1", "d2")
        for n in all_n
    }

    def chunk(start, count):
        h_ref, db_ref = engine.ou_batch(
            spec, coeff_ref, N_REF, SEED + eps_tag, Role.SWEEP, start, count
        )
        for n in all_n:
            r = N_REF // n
            c = coeffs[n]
            h = np.ascontiguousarray(h_ref[:, :, ::r])
            db = np.ascontiguousarray(db_ref.reshape(count, spec.d, n, r).sum(axis=3))
            sl = slice(start, start + count)
            _, f = engine.gamma_batch(spec, drift, c, semx[n][:, :-1], h)
            cm, ito = engine.weight_batch(c, f, db)
            rho = np.exp(-0.5 * cm + ito)
            zt = h[:, :, -1] + semx[n][:, -1]
            out[("w1", n)][sl] = zt[:, 0] * rho
            out[("w2", n)][sl] = np.sum(zt * zt, axis=1) * rho
            noise = h[:, :, 1:] - c.decay[None, :, None] * h[:, :, :-1]
            kprev = np.zeros((count, spec.d))
            for k in range(n):
                bval = drift_eval(drift, kprev + semx[n][:, k])
                kprev = c.decay * kprev + c.phi1dt * bval + noise[:, :, k]
            zdt = kprev + semx[n][:, -1]
            out[("d1", n)][sl] = zdt[:, 0]
            out[("d2", n)][sl] = np.sum(zdt * zdt, axis=1)

    engine.map_samples(M, 4, chunk)
    return out


def calibrate(kind: str) -> float:
    worst = 0.0
    for eps_i, eps in enumerate((0.0, 0.5)):
        spec = squares_operator(8, epsilon=eps)
        drift = linear_drift(-0.5) if kind == "linear" else tanh_drift(0.5, 1.0, 8)
        for x_i, x1 in enumerate((0.0, 1.0)):
            x = np.zeros(8)
            x[0] = x1
            vals = coupled_values(spec, drift, x, 1000 * eps_i + 10 * x_i)
            for n in N_LIST:
                dt = T_END / n
                for tag in ("w1", "w2", "d1", "d2"):
                    # bias vs the fine reference, coupled
                    diff, se = mean_se(vals[(tag, n)] - vals[(tag, N_REF)])
                    est = abs(diff) + 3.0 * se
                    worst = max(worst, est / dt)
                if kind == "linear":
                    # absolute bias vs the closed form at the finest reference
                    mean_o = float(ou_terminal_mean(spec, drift.c, x, T_END)[0])
                    second_o = float(
                        np.sum(ou_terminal_mean(spec, drift.c, x, T_END) ** 2)
                        + np.sum(ou_terminal_variance(spec, drift.c, T_END))
                    )
                    for tag, oracle in (("d1", mean_o), ("d2", second_o), ("w1", mean_o), ("w2", second_o)):
                        diff, se = mean_se(vals[(tag, n)] - vals[(tag, N_REF)])
                        ref_mean, ref_se = mean_se(vals[(tag, N_REF)])
                        bias = abs(ref_mean + diff - oracle) + 3.0 * math.hypot(se, ref_se)
                        worst = max(worst, bias / dt)
            print(f"  {kind} eps={eps} x1={x1}: running worst C = {worst:.3f}")
    return worst


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--write", action="store_true", help="rewrite _budget.py")
    args = parser.parse_args()

    budgets = {"zero": 0.0}
    for kind in ("linear", "tanh"):
        budgets[kind] = round(2.0 * calibrate(kind), 3)
    budgets["custom"] = round(max(budgets.values()) * 1.5, 3)
    print("calibrated budgets:", budgets)

    if args.write:
        path = Path(__file__).resolve().parent.parent / "src" / "mild_girsanov" / "_budget.py"
        text = path.read_text()
        block = "BIAS_PER_DT = {\n" + "".join(
            f'    "{k}": {v},\n' for k, v in budgets.items()
        ) + "}"
        text = re.sub(r"BIAS_PER_DT = \{[^}]*\}", block, text)
        path.write_text(text)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
