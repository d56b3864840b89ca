"""Machine-readable experiment reports: JSON records plus plot-ready CSV.

Layout of ``report.json``::

    {
      "header":  {"experiment": ..., "seed": ..., "version": ..., "config": {...}},
      "rows":    [ {...}, ... ],            # one record per trial/grid point
      "summary": {..., "assertions": [{"name", "passed", "detail"}, ...]}
    }

Summaries are pure functions of the rows, so a loaded report can be checked
by recomputing them (:func:`load_report` with a recompute callback).  Floats
are serialised with their shortest round-trip representation, which makes
reports byte-for-byte reproducible from (config, seed).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class Assertion:
    name: str
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class ExperimentReport:
    header: dict
    rows: list[dict]
    summary: dict
    curves: dict[str, tuple[list[str], list[dict]]] = field(default_factory=dict)

    @property
    def assertions(self) -> list[dict]:
        return self.summary.get("assertions", [])

    @property
    def all_passed(self) -> bool:
        return all(a["passed"] for a in self.assertions)


def write_report(report: ExperimentReport, out_dir) -> Path:
    """Write report.json and every curve_<name>.csv under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    payload = {"header": report.header, "rows": report.rows, "summary": report.summary}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    for name, (fieldnames, rows) in report.curves.items():
        write_curve(out_dir, name, fieldnames, rows)
    return path


def write_curve(out_dir, name: str, fieldnames: list[str], rows: list[dict]) -> Path:
    path = Path(out_dir) / f"curve_{name}.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row[k]) for k in fieldnames})
    return path


def _fmt(value):
    return repr(value) if isinstance(value, float) else value


def load_report(path, recompute=None) -> dict:
    """Load report.json; optionally verify the summary against the rows.

    ``recompute`` maps (header, rows) back to a summary; any mismatch with
    the stored summary raises ValueError.
    """
    with open(path) as fh:
        payload = json.load(fh)
    for key in ("header", "rows", "summary"):
        if key not in payload:
            raise ValueError(f"{path}: missing report section {key!r}")
    if recompute is not None:
        fresh = recompute(payload["header"], payload["rows"])
        if fresh != payload["summary"]:
            raise ValueError(f"{path}: stored summary does not match its rows")
    return payload
