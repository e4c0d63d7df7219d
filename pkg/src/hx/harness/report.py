"""Suite reports and their JSON/CSV serialization.

Floats are written with ``repr`` precision, which round-trips exactly, and
non-finite values as the strings ``"inf"``, ``"-inf"`` and ``"nan"``.  No
timestamps or worker counts are recorded, so a report depends only on the
configuration and the library versions.
"""

from __future__ import annotations

import csv
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import scipy

import hx

__all__ = ["TrialRecord", "IdentityRecord", "EstimateReport", "emit_report", "load_report", "environment"]


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    lhs: float
    rhs: float
    ratio: float


@dataclass(frozen=True)
class IdentityRecord:
    name: str
    residual: float
    tolerance: float
    passed: bool
    details: dict[str, Any] = field(default_factory=dict)


def environment() -> dict[str, str]:
    return {
        "hx": hx.__version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


@dataclass
class EstimateReport:
    """Result of one suite run.

    ``trials`` holds the base-grid trials that entered the ratio statistics;
    ``excluded`` counts trials dropped for a degenerate right-hand side.
    ``identities`` holds pass/fail checks (exact identities, or the
    assertions of a ratio suite).  ``sections`` carries per-characterization
    tables for the trace suite.
    """

    suite: str
    config: dict[str, Any] = field(default_factory=dict)
    trials: list[TrialRecord] = field(default_factory=list)
    aggregate: dict[str, Any] = field(default_factory=dict)
    identities: list[IdentityRecord] = field(default_factory=list)
    sections: list[dict[str, Any]] = field(default_factory=list)
    excluded: int = 0
    metadata: dict[str, Any] = field(default_factory=environment)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.identities)

    def to_dict(self) -> dict[str, Any]:
        out = {
            "suite": self.suite,
            "config": self.config,
            "trials": [
                {"trial": t.trial, "seed": t.seed, "lhs": t.lhs, "rhs": t.rhs, "ratio": t.ratio}
                for t in self.trials
            ],
            "aggregate": self.aggregate,
            "identities": [
                {"name": r.name, "residual": r.residual, "tolerance": r.tolerance, "pass": r.passed,
                 **({"details": r.details} if r.details else {})}
                for r in self.identities
            ],
            "excluded": self.excluded,
            "passed": self.passed,
            "metadata": self.metadata,
        }
        if self.sections:
            out["sections"] = self.sections
        return _encode(out)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EstimateReport":
        data = _decode(data)
        return cls(
            suite=data["suite"],
            config=data.get("config", {}),
            trials=[TrialRecord(**t) for t in data.get("trials", [])],
            aggregate=data.get("aggregate", {}),
            identities=[
                IdentityRecord(r["name"], r["residual"], r["tolerance"], r["pass"], r.get("details", {}))
                for r in data.get("identities", [])
            ],
            sections=data.get("sections", []),
            excluded=data.get("excluded", 0),
            metadata=data.get("metadata", {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"


_NONFINITE = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}


def _encode(obj):
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    if isinstance(obj, str) and obj in _NONFINITE:
        return _NONFINITE[obj]
    return obj


def emit_report(report: EstimateReport, path: str | Path, csv_path: str | Path | None = None) -> Path:
    """Write ``report`` as JSON, and optionally its ratio table as CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.to_json())
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["trial", "seed", "lhs", "rhs", "ratio"])
            for t in report.trials:
                w.writerow([t.trial, t.seed, repr(t.lhs), repr(t.rhs), repr(t.ratio)])
    return path


def load_report(path: str | Path) -> EstimateReport:
    return EstimateReport.from_dict(json.loads(Path(path).read_text()))
