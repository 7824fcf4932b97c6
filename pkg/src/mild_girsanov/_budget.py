"""Discretization-bias budgets for estimator-vs-oracle comparisons.

Regenerated by scripts/calibrate_bias.py: per drift kind, the worst
observed |bias| / dt over the comparison matrix at N in {64, 128, 256},
times a safety factor of two.  Zero drift is sampled exactly, so its
budget is zero.  Agreement tests between the weighted and direct
estimators share these constants even though their mutual gap carries no
discretization bias (the two discrete estimators follow the same law).
"""

BIAS_PER_DT = {
    "zero": 0.0,
    "linear": 5.805,
    "tanh": 0.585,
    "custom": 8.707,
}


def bias_budget(drift_kind: str, dt: float) -> float:
    return BIAS_PER_DT.get(drift_kind, 2.0) * dt


def agreement_budget(drift_kind: str, dt: float, se_a: float, se_b: float) -> float:
    combined = (se_a * se_a + se_b * se_b) ** 0.5
    return 3.0 * combined + bias_budget(drift_kind, dt)
