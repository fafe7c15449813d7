"""Raw series ingestion, monthly aggregation, transforms and panel alignment."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, DomainViolation, EmptySeries, MissingObservation, MissingSeries

TRANSFORM_KINDS = ("level", "log", "log1p", "none")


@dataclass(frozen=True, order=True)
class SeriesKey:
    country: str
    variable: str

    def __str__(self) -> str:
        return f"{self.country}.{self.variable}"

    @classmethod
    def parse(cls, text: str) -> "SeriesKey":
        country, sep, variable = text.partition(".")
        if not sep or not country or not variable:
            raise ValueError(f"series key must look like COUNTRY.variable, got {text!r}")
        return cls(country, variable)


def to_month(value) -> np.datetime64:
    """Coerce '2006-01', '2006M1', a date or a datetime64 to a month."""
    if isinstance(value, str):
        text = value.strip()
        if "M" in text.upper() and "-" not in text:
            year, _, month = text.upper().partition("M")
            text = f"{int(year):04d}-{int(month):02d}"
        return np.datetime64(text[:7], "M")
    return np.datetime64(value, "M")


def month_range(start, end) -> np.ndarray:
    """Inclusive range of calendar months."""
    start, end = to_month(start), to_month(end)
    if end < start:
        raise ValueError(f"empty month range {start}..{end}")
    return np.arange(start, end + 1, dtype="datetime64[M]")


def months_between(start, end) -> int:
    return int((to_month(end) - to_month(start)).astype(int))


@dataclass(frozen=True)
class RawSeries:
    key: SeriesKey
    dates: np.ndarray
    values: np.ndarray
    unit: str = ""

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        values = np.asarray(self.values, dtype=float)
        if dates.shape != values.shape or dates.ndim != 1:
            raise DataError(f"{self.key}: dates and values must be 1-d and equally long")
        if dates.size > 1 and np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise DataError(f"{self.key}: dates must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise DataError(f"{self.key}: values must be finite")
        dates.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class TransformSpec:
    kind: str
    applied_to: SeriesKey

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise ValueError(f"unknown transform {self.kind!r}; expected one of {TRANSFORM_KINDS}")


def aggregate_to_monthly(raw: RawSeries) -> RawSeries:
    """Average all observations falling in each calendar month.

    Months without observations are simply absent from the result. Output
    dates are the first day of each month.
    """
    if len(raw) == 0:
        raise EmptySeries(f"{raw.key}: no observations to aggregate")
    months = raw.dates.astype("datetime64[M]")
    uniq, inverse = np.unique(months, return_inverse=True)
    sums = np.bincount(inverse, weights=raw.values, minlength=uniq.size)
    counts = np.bincount(inverse, minlength=uniq.size)
    return RawSeries(raw.key, uniq.astype("datetime64[D]"), sums / counts, raw.unit)


def transform_values(values, kind: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if kind in ("level", "none"):
        return values.copy()
    if kind == "log":
        return np.log(values)
    if kind == "log1p":
        return np.log1p(values)
    raise ValueError(f"unknown transform {kind!r}")


def inverse_transform_values(values, kind: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if kind in ("level", "none"):
        return values.copy()
    if kind == "log":
        return np.exp(values)
    if kind == "log1p":
        return np.expm1(values)
    raise ValueError(f"unknown transform {kind!r}")


def _first_violation(values: np.ndarray, kind: str):
    if kind == "log":
        bad = np.flatnonzero(~(values > 0))
    elif kind == "log1p":
        bad = np.flatnonzero(~(values >= 0))
    else:
        return None
    return int(bad[0]) if bad.size else None


def apply_transform(raw: RawSeries, spec: TransformSpec) -> RawSeries:
    idx = _first_violation(raw.values, spec.kind)
    if idx is not None:
        raise DomainViolation(raw.key, raw.dates[idx], float(raw.values[idx]), spec.kind)
    return RawSeries(raw.key, raw.dates, transform_values(raw.values, spec.kind), raw.unit)


def inverse_transform(series: RawSeries, spec: TransformSpec) -> RawSeries:
    return RawSeries(series.key, series.dates, inverse_transform_values(series.values, spec.kind), series.unit)


@dataclass(frozen=True)
class ObservationPanel:
    """Aligned monthly sample of endogenous and exogenous variables.

    ``endogenous`` and ``exogenous`` hold transformed values; ``exogenous_raw``
    keeps the pre-transform levels, which scenario shocks operate on.
    """

    time_index: np.ndarray
    endogenous: np.ndarray
    exogenous: np.ndarray
    endo_order: tuple[SeriesKey, ...]
    exo_order: tuple[SeriesKey, ...]
    transforms: tuple[TransformSpec, ...] = ()
    exogenous_raw: np.ndarray | None = None
    endogenous_raw: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "time_index", np.asarray(self.time_index, dtype="datetime64[M]"))
        object.__setattr__(self, "endo_order", tuple(self.endo_order))
        object.__setattr__(self, "exo_order", tuple(self.exo_order))
        object.__setattr__(self, "transforms", tuple(self.transforms))
        T = self.time_index.size
        if T > 1 and np.any(np.diff(self.time_index).astype(int) != 1):
            raise DataError("time_index must be contiguous monthly")
        for name, arr, width in (
            ("endogenous", self.endogenous, len(self.endo_order)),
            ("exogenous", self.exogenous, len(self.exo_order)),
        ):
            arr = np.asarray(arr, dtype=float).reshape(T, width)
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} panel contains missing or non-finite cells")
            object.__setattr__(self, name, arr)
        if len(set(self.endo_order) | set(self.exo_order)) != len(self.endo_order) + len(self.exo_order):
            raise DataError("series keys must be unique within a panel")

    @property
    def T(self) -> int:
        return self.time_index.size

    @property
    def k(self) -> int:
        return len(self.endo_order)

    @property
    def m(self) -> int:
        return len(self.exo_order)

    @property
    def countries(self) -> list[str]:
        seen: dict[str, None] = {}
        for key in self.endo_order:
            seen.setdefault(key.country)
        return list(seen)

    def transform_kind(self, key: SeriesKey) -> str:
        for spec in self.transforms:
            if spec.applied_to == key:
                return spec.kind
        return "level"

    def rows(self, start, end) -> slice:
        """Slice of panel rows covering the inclusive month range."""
        i0 = months_between(self.time_index[0], start)
        i1 = months_between(self.time_index[0], end)
        if i0 < 0 or i1 >= self.T or i1 < i0:
            raise DataError(f"range {to_month(start)}..{to_month(end)} outside panel sample")
        return slice(i0, i1 + 1)


def _monthly_lookup(series: RawSeries) -> dict[np.datetime64, float]:
    months = series.dates.astype("datetime64[M]")
    if np.unique(months).size != months.size:
        raise DataError(f"{series.key}: more than one observation per month; aggregate first")
    return dict(zip(months.tolist(), series.values.tolist()))


def align_panel(
    series: Iterable[RawSeries],
    sample_range: Sequence,
    endo_order: Sequence[SeriesKey],
    exo_order: Sequence[SeriesKey] = (),
    transforms: Mapping[SeriesKey, TransformSpec] | None = None,
) -> ObservationPanel:
    """Cut monthly series to a common sample and stack them in the given order.

    Values are copied exactly; gaps raise MissingObservation. When
    ``transforms`` is given, each column is transformed after alignment and the
    exogenous raw levels are kept alongside.
    """
    by_key = {s.key: s for s in series}
    months = month_range(*sample_range)
    month_list = months.astype("datetime64[D]").astype(object)
    transforms = dict(transforms or {})

    def column(key: SeriesKey) -> np.ndarray:
        if key not in by_key:
            raise MissingSeries(key)
        lookup = _monthly_lookup(by_key[key])
        out = np.empty(months.size)
        for t, month in enumerate(month_list):
            try:
                out[t] = lookup[month]
            except KeyError:
                raise MissingObservation(key, str(np.datetime64(month, "M"))) from None
        return out

    def block(order):
        if not order:
            return np.empty((months.size, 0)), np.empty((months.size, 0))
        raw = np.column_stack([column(k) for k in order])
        out = raw.copy()
        for j, key in enumerate(order):
            if key in transforms:
                out[:, j] = apply_transform(
                    RawSeries(key, months.astype("datetime64[D]"), raw[:, j]), transforms[key]
                ).values
        return raw, out

    endo_raw, endo = block(endo_order)
    exo_raw, exo = block(exo_order)
    specs = tuple(
        transforms.get(k, TransformSpec("level", k)) for k in list(endo_order) + list(exo_order)
    )
    return ObservationPanel(
        time_index=months,
        endogenous=endo,
        exogenous=exo,
        endo_order=tuple(endo_order),
        exo_order=tuple(exo_order),
        transforms=specs,
        exogenous_raw=exo_raw,
        endogenous_raw=endo_raw,
    )


# -- CSV ---------------------------------------------------------------------

def format_number(x: float) -> str:
    return format(float(x), ".17g")


def read_series_csv(path, key: SeriesKey, unit: str = "") -> RawSeries:
    path = Path(path)
    if not path.exists():
        raise MissingSeries(key)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["date", "value"]:
            raise DataError(f"{path}: expected header 'date,value'")
        dates, values = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                dates.append(np.datetime64(row[0].strip(), "D"))
                values.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: cannot parse {row!r}") from exc
    return RawSeries(key, np.array(dates, dtype="datetime64[D]"), np.array(values), unit)


def write_series_csv(path, series: RawSeries) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "value"])
        for d, v in zip(series.dates.astype(str), series.values):
            writer.writerow([d, format_number(v)])


def series_filename(key: SeriesKey) -> str:
    return f"{key.country}_{key.variable}.csv"
