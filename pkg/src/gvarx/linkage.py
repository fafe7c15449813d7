"""Exposure-based weights and the per-country link matrices W_i."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, ForeignVarUnavailable, OrderMismatch, ZeroRow
from .timeseries import ObservationPanel, SeriesKey, format_number


@dataclass(frozen=True)
class ExposureMatrix:
    countries: tuple[str, ...]
    exposure: np.ndarray

    def __post_init__(self):
        arr = np.array(self.exposure, dtype=float)
        n = len(self.countries)
        if arr.shape != (n, n):
            raise DataError(f"exposure matrix must be {n}x{n}, got {arr.shape}")
        np.fill_diagonal(arr, 0.0)
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise DataError("exposure entries must be finite and nonnegative")
        object.__setattr__(self, "countries", tuple(self.countries))
        object.__setattr__(self, "exposure", arr)


@dataclass(frozen=True)
class LinkageWeights:
    countries: tuple[str, ...]
    w: np.ndarray

    def index(self, country: str) -> int:
        return self.countries.index(country)

    def weight(self, source: str, partner: str) -> float:
        return float(self.w[self.index(source), self.index(partner)])


@dataclass(frozen=True)
class CountrySpec:
    country: str
    domestic_vars: tuple[str, ...]
    foreign_vars: tuple[str, ...]

    def __post_init__(self):
        if not self.domestic_vars:
            raise DataError(f"{self.country}: domestic variable list is empty")
        object.__setattr__(self, "domestic_vars", tuple(self.domestic_vars))
        object.__setattr__(self, "foreign_vars", tuple(self.foreign_vars))

    @property
    def k(self) -> int:
        return len(self.domestic_vars)

    @property
    def k_star(self) -> int:
        return len(self.foreign_vars)

    @property
    def domestic_keys(self) -> list[SeriesKey]:
        return [SeriesKey(self.country, v) for v in self.domestic_vars]

    @property
    def foreign_keys(self) -> list[SeriesKey]:
        return [SeriesKey(self.country, f"{v}*") for v in self.foreign_vars]


@dataclass(frozen=True)
class LinkMatrix:
    country: str
    W: np.ndarray
    row_labels: tuple[SeriesKey, ...]
    global_order: tuple[SeriesKey, ...]
    k_domestic: int

    @property
    def domestic(self) -> np.ndarray:
        return self.W[: self.k_domestic]

    @property
    def foreign(self) -> np.ndarray:
        return self.W[self.k_domestic:]


def normalize_weights(e: ExposureMatrix) -> LinkageWeights:
    """Row-normalize off-diagonal exposures into shares summing to one."""
    totals = e.exposure.sum(axis=1)
    for i, total in enumerate(totals):
        if not total > 0:
            raise ZeroRow(e.countries[i])
    w = e.exposure / totals[:, None]
    np.fill_diagonal(w, 0.0)
    return LinkageWeights(e.countries, w)


def build_link_matrix(
    spec: CountrySpec, weights: LinkageWeights, global_order: Sequence[SeriesKey]
) -> LinkMatrix:
    """Selection rows for the country's own variables, then one weighted average
    row per foreign variable.

    Partners lacking a variable are dropped from that row and the remaining
    weights rescaled to sum to one.
    """
    global_order = tuple(global_order)
    col = {key: j for j, key in enumerate(global_order)}
    k = len(global_order)
    i = weights.index(spec.country)

    rows = []
    for key in spec.domestic_keys:
        if key not in col:
            raise OrderMismatch(f"{key} not present in global variable order")
        row = np.zeros(k)
        row[col[key]] = 1.0
        rows.append(row)

    for var in spec.foreign_vars:
        row = np.zeros(k)
        partners = [
            (j, col[SeriesKey(c, var)])
            for j, c in enumerate(weights.countries)
            if c != spec.country and SeriesKey(c, var) in col
        ]
        if not partners:
            raise ForeignVarUnavailable(var, spec.country)
        for j, c_idx in partners:
            row[c_idx] = weights.w[i, j]
        total = row.sum()
        if not total > 0:
            raise ForeignVarUnavailable(var, spec.country)
        rows.append(row / total)

    return LinkMatrix(
        country=spec.country,
        W=np.vstack(rows),
        row_labels=tuple(spec.domestic_keys + spec.foreign_keys),
        global_order=global_order,
        k_domestic=spec.k,
    )


def foreign_series(panel: ObservationPanel, lm: LinkMatrix) -> np.ndarray:
    """T x k_i* matrix of foreign (star) variables for one country."""
    if tuple(panel.endo_order) != lm.global_order:
        raise OrderMismatch(f"panel order does not match link matrix of {lm.country}")
    return panel.endogenous @ lm.foreign.T


def read_exposure_csv(path) -> ExposureMatrix:
    path = Path(path)
    if not path.exists():
        raise DataError(f"exposure file {path} not found")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    header = [c.strip() for c in rows[0][1:]]
    body = rows[1:]
    labels = [r[0].strip() for r in body]
    if labels != header:
        raise DataError(f"{path}: row labels {labels} do not match column labels {header}")
    values = []
    for r in body:
        values.append([float(x) if x.strip() not in ("", ".", "-") else 0.0 for x in r[1:]])
    return ExposureMatrix(tuple(header), np.array(values))


def write_exposure_csv(path, e: ExposureMatrix) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["country", *e.countries])
        for c, row in zip(e.countries, e.exposure):
            writer.writerow([c, *(format_number(x) for x in row)])
