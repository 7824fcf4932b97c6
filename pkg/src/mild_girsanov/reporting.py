"""Run reports, CSV/JSON persistence and the stdout summary table.

CSV cells carry 17 significant digits so that re-reading reproduces the
exact doubles; all logging goes to stderr, results only to files and the
stdout summary.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

SCHEMA_ID = "mild-girsanov/1"

__all__ = ["Check", "RunReport", "fmt17", "write_csv", "write_json_records", "dump_paths_csv"]


@dataclass
class Check:
    """One named verification with its value, reference and verdict.

    status is ``pass``/``fail`` for asserted checks and ``recorded`` for
    quantities the theory does not pin down numerically.
    """

    name: str
    value: float
    status: str
    std_error: Optional[float] = None
    bound: Optional[float] = None
    detail: str = ""

    @staticmethod
    def asserted(name, value, ok, std_error=None, bound=None, detail=""):
        return Check(
            name=name,
            value=float(value),
            status="pass" if ok else "fail",
            std_error=None if std_error is None else float(std_error),
            bound=None if bound is None else float(bound),
            detail=detail,
        )

    @staticmethod
    def recorded(name, value, std_error=None, bound=None, detail=""):
        return Check(
            name=name,
            value=float(value),
            status="recorded",
            std_error=None if std_error is None else float(std_error),
            bound=None if bound is None else float(bound),
            detail=detail,
        )


@dataclass
class RunReport:
    experiment: str
    seed: int
    config_echo: str
    checks: List[Check] = field(default_factory=list)
    wall_time_ms: float = 0.0
    backend: str = ""
    version: str = ""

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def add(self, check: Check) -> None:
        self.checks.append(check)

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_ID,
            "experiment": self.experiment,
            "seed": self.seed,
            "passed": self.passed,
            "wall_time_ms": self.wall_time_ms,
            "backend": self.backend,
            "version": self.version,
            "config": self.config_echo,
            "checks": [
                {
                    "name": c.name,
                    "value": c.value,
                    "std_error": c.std_error,
                    "bound": c.bound,
                    "status": c.status,
                    "detail": c.detail,
                }
                for c in self.checks
            ],
        }

    def write(self, out_dir: Path) -> None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(json.dumps(self.to_json(), indent=2) + "\n")
        (out_dir / "config-echo.txt").write_text(self.config_echo)
        write_csv(
            out_dir / "checks.csv",
            ["name", "value", "std_error", "bound", "status", "detail"],
            [
                [c.name, c.value, c.std_error, c.bound, c.status, c.detail]
                for c in self.checks
            ],
        )

    def print_summary(self, stream=None) -> None:
        stream = stream or sys.stdout
        width = max((len(c.name) for c in self.checks), default=4)
        print(f"experiment: {self.experiment}  (seed {self.seed}, {self.backend} kernels)", file=stream)
        for c in self.checks:
            se = f" +- {c.std_error:.3g}" if c.std_error is not None else ""
            bound = f"  [ref {c.bound:.6g}]" if c.bound is not None else ""
            print(f"  {c.name:<{width}}  {c.value: .8g}{se}{bound}  {c.status.upper()}", file=stream)
        verdict = "PASS" if self.passed else "FAIL"
        print(f"result: {verdict}  ({self.wall_time_ms:.0f} ms)", file=stream)


def fmt17(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            return str(value)
        return format(value, ".17g")
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([fmt17(cell) for cell in row])


def write_json_records(path: Path, records: Iterable[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(list(records), indent=2) + "\n")


def estimate_record(experiment: str, params: dict, est, seed: int, wall_time_ms: float) -> dict:
    """Serialized estimate in the shared record layout."""
    return {
        "experiment": experiment,
        "params": params,
        "value": est.value,
        "std_error": est.std_error,
        "ess": est.ess,
        "n": est.n,
        "seed": seed,
        "wall_time_ms": wall_time_ms,
    }


def dump_paths_csv(path: Path, samples, grid) -> None:
    """Debug dump: one row per (sample, mode, node) with h and dB."""
    rows = []
    nodes = grid.nodes
    for sid, sample in enumerate(samples):
        d, n_nodes = sample.h.shape
        for j in range(d):
            for k in range(n_nodes):
                db = sample.db[j, k] if k < n_nodes - 1 else ""
                rows.append([sid, j, k, nodes[k], sample.h[j, k], db])
    write_csv(path, ["sample_id", "mode", "node_index", "time", "h", "dB"], rows)
