"""Readers for the CSV files the minea-ergo command line writes.

Every reader validates the column layout before touching a single value and
raises SchemaError with an expected-vs-found diagnostic on mismatch. Files
are opened read-only; nothing here ever modifies an input.
"""

import csv
from dataclasses import dataclass

import numpy as np

PHASE_COLUMNS = ["kappa", "sigma", "regime", "ks_u1", "timeavg_X", "e55_bound", "verdict"]
TRAJECTORY_COLUMNS = ["t", "u1", "u2", "u3", "X"]
VERDICTS = ("unique-like", "multi-like", "inconclusive", "error")


class SchemaError(Exception):
    """Input file does not match the documented minea-ergo schema."""


def _read_rows(path: str) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as err:
        raise SchemaError(f"cannot read {path}: {err}") from None
    if not rows:
        raise SchemaError(f"{path}: file is empty, expected a header row")
    header, data = rows[0], rows[1:]
    if not data:
        raise SchemaError(f"{path}: no data rows after the header")
    return header, data


def _require_columns(path: str, header: list[str], expected: list[str]) -> None:
    if header != expected:
        missing = [c for c in expected if c not in header]
        extra = [c for c in header if c not in expected]
        detail = []
        if missing:
            detail.append(f"missing columns {missing}")
        if extra:
            detail.append(f"unexpected columns {extra}")
        if not detail:
            detail.append("columns out of order")
        raise SchemaError(
            f"{path}: header {header} does not match expected {expected} ({'; '.join(detail)})"
        )


def _parse_float(path: str, cell: str, row: int, column: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise SchemaError(
            f"{path}: row {row}, column '{column}': expected a number, got {cell!r}"
        ) from None


@dataclass(frozen=True)
class PhaseScan:
    """One phase-scan table: parallel arrays, one entry per (kappa, sigma) cell."""

    kappa: np.ndarray
    sigma: np.ndarray
    regime: list[str]
    ks_u1: np.ndarray
    timeavg_x: np.ndarray
    e55_bound: np.ndarray
    verdict: list[str]

    def __len__(self) -> int:
        return self.kappa.size


@dataclass(frozen=True)
class TrajectoryTable:
    times: np.ndarray
    u: np.ndarray
    x: np.ndarray


def read_phase_scan(path: str) -> PhaseScan:
    header, data = _read_rows(path)
    _require_columns(path, header, PHASE_COLUMNS)
    kappa, sigma, ks, tavg, bound = [], [], [], [], []
    regime, verdict = [], []
    seen = set()
    for i, row in enumerate(data, start=1):
        if len(row) != len(PHASE_COLUMNS):
            raise SchemaError(f"{path}: row {i} has {len(row)} fields, expected {len(PHASE_COLUMNS)}")
        kappa.append(_parse_float(path, row[0], i, "kappa"))
        sigma.append(_parse_float(path, row[1], i, "sigma"))
        regime.append(row[2])
        ks.append(_parse_float(path, row[3], i, "ks_u1"))
        tavg.append(_parse_float(path, row[4], i, "timeavg_X"))
        bound.append(_parse_float(path, row[5], i, "e55_bound"))
        if row[6] not in VERDICTS:
            raise SchemaError(
                f"{path}: row {i}: verdict {row[6]!r} is not one of {list(VERDICTS)}"
            )
        verdict.append(row[6])
        cell = (kappa[-1], sigma[-1])
        if cell in seen:
            raise SchemaError(f"{path}: duplicate cell kappa={row[0]}, sigma={row[1]}")
        seen.add(cell)
    return PhaseScan(
        kappa=np.array(kappa),
        sigma=np.array(sigma),
        regime=regime,
        ks_u1=np.array(ks),
        timeavg_x=np.array(tavg),
        e55_bound=np.array(bound),
        verdict=verdict,
    )


def read_samples(path: str) -> np.ndarray:
    """One-column sample file (e.g. a dual-basin endpoint CSV); header name is free."""
    header, data = _read_rows(path)
    if len(header) != 1:
        raise SchemaError(
            f"{path}: expected a single sample column, found {len(header)} columns {header}"
        )
    out = np.empty(len(data))
    for i, row in enumerate(data, start=1):
        if len(row) != 1:
            raise SchemaError(f"{path}: row {i} has {len(row)} fields, expected 1")
        out[i - 1] = _parse_float(path, row[0], i, header[0])
    if not np.all(np.isfinite(out)):
        raise SchemaError(f"{path}: samples contain non-finite values")
    return out


def read_trajectory(path: str) -> TrajectoryTable:
    header, data = _read_rows(path)
    _require_columns(path, header, TRAJECTORY_COLUMNS)
    table = np.empty((len(data), 5))
    for i, row in enumerate(data, start=1):
        if len(row) != 5:
            raise SchemaError(f"{path}: row {i} has {len(row)} fields, expected 5")
        for j, column in enumerate(TRAJECTORY_COLUMNS):
            table[i - 1, j] = _parse_float(path, row[j], i, column)
    times = table[:, 0]
    if times.size > 1 and not np.all(np.diff(times) > 0):
        raise SchemaError(f"{path}: column 't' must be strictly increasing")
    return TrajectoryTable(times=times, u=table[:, 1:4], x=table[:, 4])
