"""Report serialization: fixed-order CSV and JSON for estimate runs and
design tables.

Machine-readable output is byte-reproducible for a fixed configuration:
floats are written with ``repr`` (shortest round-trip form) and the JSON
wall-time field is the only part that varies between identical runs.
"""

from __future__ import annotations

import json
import math
from typing import Mapping, Sequence

from .estimator import EstimateReport

__all__ = [
    "ESTIMATE_COLUMNS",
    "estimate_row",
    "estimate_csv",
    "estimate_json",
    "table_csv",
    "table_json",
]

#: fixed, documented column order of estimate reports
ESTIMATE_COLUMNS = (
    "experiment",
    "seed",
    "M",
    "mean",
    "stderr",
    "var_y",
    "sigma2_hat_mean",
    "mean_N",
    "mean_cost",
)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def estimate_row(experiment: str, report: EstimateReport) -> dict:
    """Report fields keyed by the documented column names."""
    return {
        "experiment": experiment,
        "seed": report.seed,
        "M": report.m,
        "mean": report.mean,
        "stderr": report.stderr,
        "var_y": report.var_y,
        "sigma2_hat_mean": report.sigma2_hat_mean,
        "mean_N": report.mean_level,
        "mean_cost": report.mean_cost,
    }


def estimate_csv(experiment: str, report: EstimateReport) -> str:
    row = estimate_row(experiment, report)
    header = ",".join(ESTIMATE_COLUMNS)
    data = ",".join(_fmt(row[c]) for c in ESTIMATE_COLUMNS)
    return header + "\n" + data + "\n"


def estimate_json(
    experiment: str,
    report: EstimateReport,
    extra: Mapping | None = None,
    wall_time_s: float | None = None,
) -> str:
    payload = estimate_row(experiment, report)
    if math.isnan(report.sigma2_hat_mean):
        payload["sigma2_hat_mean"] = None
    payload["n_failed"] = report.n_failed
    if extra:
        payload.update(extra)
    if wall_time_s is not None:
        payload["wall_time_s"] = wall_time_s
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def table_csv(columns: Sequence[str], rows: Sequence[Mapping]) -> str:
    """Generic fixed-column table (used by the design subcommand)."""
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def table_json(columns: Sequence[str], rows: Sequence[Mapping], wall_time_s: float | None = None) -> str:
    payload = {"columns": list(columns), "rows": [dict(r) for r in rows]}
    if wall_time_s is not None:
        payload["wall_time_s"] = wall_time_s
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
