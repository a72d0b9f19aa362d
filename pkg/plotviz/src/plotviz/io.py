"""Readers for the estimator CLI's CSV and JSON outputs."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import EmptyTable, ParseError


def _read_table(path) -> dict[str, np.ndarray]:
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise EmptyTable(f"{path}: no header row")
        rows = list(reader)
    if not rows:
        raise EmptyTable(f"{path}: no data rows")
    table = {}
    for name in reader.fieldnames:
        try:
            table[name] = np.array([float(row[name]) for row in rows])
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{path}: column {name!r} has a non-numeric entry") from exc
    return table


def read_density_table(path):
    """(x, density) from a per-subset density table."""
    table = _read_table(path)
    for column in ("x", "density"):
        if column not in table:
            raise ParseError(f"{path}: missing column {column!r}")
    return table["x"], table["density"]


def read_combined_table(path):
    """(x, normalized density) from a combined-estimator table."""
    table = _read_table(path)
    for column in ("x", "p_tilde_normalized"):
        if column not in table:
            raise ParseError(f"{path}: missing column {column!r}")
    return table["x"], table["p_tilde_normalized"]


def read_curve(path):
    """Density or combined table, whichever the columns say it is."""
    table = _read_table(path)
    if "density" in table and "x" in table:
        return table["x"], table["density"]
    if "p_tilde_normalized" in table and "x" in table:
        return table["x"], table["p_tilde_normalized"]
    raise ParseError(f"{path}: expected a density or combined table")


def read_results_table(path):
    """Columns of the experiment results file."""
    table = _read_table(path)
    for column in ("n", "mean_ise", "std_ise", "bound_value"):
        if column not in table:
            raise ParseError(f"{path}: missing column {column!r}")
    return table


def read_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        report = json.load(handle)
    for field in ("slope", "intercept", "theoretical_slope", "bound_constant"):
        if field not in report:
            raise ParseError(f"{path}: missing field {field!r}")
    return report
