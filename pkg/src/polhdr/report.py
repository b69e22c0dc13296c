"""Delimited/JSON report writers and the fit statistics used on sweep tables."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

SWEEP_COLUMNS = ("rho", "alpha", "theta_true_deg", "theta_hat_deg", "error_pct")


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def sweep_table(rows) -> list[dict]:
    return [
        {
            "rho": r.rho,
            "alpha": r.alpha,
            "theta_true_deg": math.degrees(r.theta_true),
            "theta_hat_deg": math.degrees(r.theta_hat),
            "error_pct": r.error_pct,
        }
        for r in rows
    ]


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for rec in sweep_table(rows):
            writer.writerow({k: repr(float(v)) for k, v in rec.items()})


def read_sweep_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return [{k: float(v) for k, v in rec.items()} for rec in csv.DictReader(f)]


def linear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares line ``y = slope*x + intercept``; returns ``(slope, intercept, r2)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def semilog_fit(rho, error):
    """Fit ``error`` against ``log10(rho)``."""
    return linear_fit(np.log10(rho), error)


def loglog_fit(rho, error):
    """Fit ``log10(error)`` against ``log10(rho)`` (a power law)."""
    return linear_fit(np.log10(rho), np.log10(error))
