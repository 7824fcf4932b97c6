"""Flat key-value experiment configuration.

The format is diff-friendly: one ``section.key = value`` per line, ``#``
comments, no nesting.  Unknown keys are rejected with their line number,
and every constraint of the upstream types is re-validated at load time.
An emitted echo of the resolved configuration reloads to bit-identical
results.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .paths import TimeGrid
from .spectral import (
    DriftSpec,
    OperatorSpec,
    SpectralModelError,
    linear_drift,
    tanh_drift,
    zero_drift,
)
from .stationary import WindowGrid

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config", "echo_config"]

EXPERIMENT_NAMES = (
    "verify-girsanov",
    "verify-kernel",
    "moment-bounds",
    "invariant",
    "density-ratio",
    "regularity",
    "colored",
    "convergence-sweep",
)

# key -> (type tag, default as string)
_SCHEMA: Dict[str, tuple] = {
    "experiment": ("str", ""),
    "operator.family": ("str", "squares"),
    "operator.eigenvalues": ("str", ""),
    "operator.d": ("int", "8"),
    "operator.beta": ("float", "0.25"),
    "operator.epsilon": ("float", "0.0"),
    "drift.kind": ("str", "tanh"),
    "drift.c": ("float", "-0.5"),
    "drift.m": ("float", "0.5"),
    "drift.a": ("float", "1.0"),
    "initial.x": ("str", "zero"),
    "initial.scale": ("float", "1.0"),
    "grid.T": ("float", "1.0"),
    "grid.N": ("int", "256"),
    "window.S": ("float", "0"),
    "window.N": ("int", "0"),
    "mc.samples": ("int", "20000"),
    "mc.master_seed": ("int", "20260810"),
    "mc.workers": ("int", "1"),
    "output.directory": ("str", "out"),
    "output.formats": ("str", "csv,json"),
    "output.dump_paths": ("int", "0"),
    "convergence.n_values": ("str", "32,64,128"),
    "convergence.n_ref": ("int", "512"),
    "convergence.samples": ("int", "20000"),
    "moment.n_list": ("str", "2,3"),
    "density.points": ("int", "9"),
    "density.bandwidth": ("float", "0.0"),
    "density.samples": ("int", "100000"),
    "invariant.burn": ("float", "8.0"),
    "invariant.avg": ("float", "32.0"),
    "invariant.chains": ("int", "64"),
}

_VALID_FORMATS = ("csv", "json", "svg")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration; message carries line/key."""


def _convert(key: str, raw: str, line_no: Optional[int]):
    kind, _ = _SCHEMA[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError:
        where = f" (line {line_no})" if line_no is not None else ""
        raise ConfigError(f"key {key!r}{where}: cannot parse {raw!r} as {kind}") from None


@dataclass
class ExperimentConfig:
    """Validated experiment parameters with constructed domain objects."""

    raw: Dict[str, object]
    experiment: str
    spec: OperatorSpec
    drift: DriftSpec
    x: np.ndarray
    grid: TimeGrid
    window: WindowGrid
    samples: int
    master_seed: int
    workers: int
    out_dir: Path
    formats: List[str]
    dump_paths: int
    convergence_n: List[int]
    convergence_ref: int
    convergence_samples: int
    moment_orders: List[int]
    density_points: int
    density_bandwidth: float
    density_samples: int
    invariant_burn: float
    invariant_avg: float
    invariant_chains: int


def parse_config(text: str, overrides: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    values: Dict[str, object] = {k: _convert(k, dflt, None) for k, (_, dflt) in _SCHEMA.items()}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        values[key] = _convert(key, raw, line_no)
    for key, raw in (overrides or {}).items():
        if key not in _SCHEMA:
            raise ConfigError(f"override: unknown key {key!r}")
        values[key] = _convert(key, str(raw), None)
    return _build(values)


def load_config(path: Optional[str], overrides: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    else:
        text = ""
    return parse_config(text, overrides)


def _build(v: Dict[str, object]) -> ExperimentConfig:
    exp = str(v["experiment"])
    if exp and exp not in EXPERIMENT_NAMES:
        raise ConfigError(f"unknown experiment {exp!r}; have {EXPERIMENT_NAMES}")

    try:
        family = v["operator.family"]
        d = int(v["operator.d"])
        if family == "squares":
            lam = (np.arange(1, d + 1, dtype=float)) ** 2
        elif family == "explicit":
            raw = str(v["operator.eigenvalues"]).strip()
            if not raw:
                raise ConfigError("operator.family = explicit needs operator.eigenvalues")
            lam = np.array([float(s) for s in raw.split(",")])
            d = lam.size
        else:
            raise ConfigError(f"operator.family must be squares|explicit, got {family!r}")
        spec = OperatorSpec(
            eigenvalues=lam,
            beta=float(v["operator.beta"]),
            epsilon=float(v["operator.epsilon"]),
        )

        kind = v["drift.kind"]
        if kind == "zero":
            drift = zero_drift()
        elif kind == "linear":
            drift = linear_drift(float(v["drift.c"]))
        elif kind == "tanh":
            drift = tanh_drift(float(v["drift.m"]), float(v["drift.a"]), spec.d)
        else:
            raise ConfigError(f"drift.kind must be zero|linear|tanh, got {kind!r}")
        drift.validate_against(spec)

        xk = v["initial.x"]
        x = np.zeros(spec.d)
        if xk == "e1":
            x[0] = float(v["initial.scale"])
        elif xk != "zero":
            raise ConfigError(f"initial.x must be zero|e1, got {xk!r}")

        grid = TimeGrid(T=float(v["grid.T"]), N=int(v["grid.N"]))

        s_len = float(v["window.S"])
        if s_len <= 0.0:
            s_len = 8.0 / spec.omega
        n_w = int(v["window.N"])
        if n_w <= 0:
            n_w = max(2, int(round(s_len * 32)))
        if n_w % 2:
            n_w += 1  # window-halving checks need an even step count
        window = WindowGrid(S=s_len, N=n_w)

        formats = [s.strip() for s in str(v["output.formats"]).split(",") if s.strip()]
        for fmt in formats:
            if fmt not in _VALID_FORMATS:
                raise ConfigError(f"output.formats entry {fmt!r} not in {_VALID_FORMATS}")

        conv_n = [int(s) for s in str(v["convergence.n_values"]).split(",") if s.strip()]
        orders = [int(s) for s in str(v["moment.n_list"]).split(",") if s.strip()]

        samples = int(v["mc.samples"])
        if samples < 2:
            raise ConfigError("mc.samples must be at least 2")
        workers = int(v["mc.workers"])
        if workers < 1:
            raise ConfigError("mc.workers must be at least 1")
        seed = int(v["mc.master_seed"])
        if not 0 <= seed < 2**64:
            raise ConfigError("mc.master_seed must fit in 64 bits")
    except SpectralModelError as exc:
        raise ConfigError(str(exc)) from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    return ExperimentConfig(
        raw=dict(v),
        experiment=exp,
        spec=spec,
        drift=drift,
        x=x,
        grid=grid,
        window=window,
        samples=samples,
        master_seed=seed,
        workers=workers,
        out_dir=Path(str(v["output.directory"])),
        formats=formats,
        dump_paths=int(v["output.dump_paths"]),
        convergence_n=conv_n,
        convergence_ref=int(v["convergence.n_ref"]),
        convergence_samples=int(v["convergence.samples"]),
        moment_orders=orders,
        density_points=int(v["density.points"]),
        density_bandwidth=float(v["density.bandwidth"]),
        density_samples=int(v["density.samples"]),
        invariant_burn=float(v["invariant.burn"]),
        invariant_avg=float(v["invariant.avg"]),
        invariant_chains=int(v["invariant.chains"]),
    )


def echo_config(cfg: ExperimentConfig) -> str:
    """Resolved configuration in the same flat format; reloads identically."""
    lines = ["# resolved configuration echo"]
    for key in _SCHEMA:
        lines.append(f"{key} = {cfg.raw[key]}")
    return "\n".join(lines) + "\n"
