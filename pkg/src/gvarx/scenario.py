"""Counterfactual exogenous-path scenarios on the reduced-form global model."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, MissingLaggedExogenous, TransformMissing, UnknownTarget
from .global_model import GlobalModel
from .timeseries import ObservationPanel, SeriesKey, format_number, month_range, months_between, to_month, transform_values

DEFAULT_WINDOW_LENGTH = 27
SHOCK_KINDS = ("scale_level", "set_dummy")


@dataclass(frozen=True)
class ExogenousPath:
    time_index: np.ndarray
    values: np.ndarray
    raw_values: np.ndarray | None
    exo_order: tuple[SeriesKey, ...]
    transforms: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "time_index", np.asarray(self.time_index, dtype="datetime64[M]"))
        object.__setattr__(self, "exo_order", tuple(self.exo_order))
        S, m = self.time_index.size, len(self.exo_order)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).reshape(S, m))
        if self.raw_values is not None:
            object.__setattr__(self, "raw_values", np.asarray(self.raw_values, dtype=float).reshape(S, m))
        if not self.transforms:
            object.__setattr__(self, "transforms", ("level",) * m)
        object.__setattr__(self, "transforms", tuple(self.transforms))

    def __len__(self) -> int:
        return self.time_index.size

    def column_index(self, key: SeriesKey) -> int:
        try:
            return self.exo_order.index(key)
        except ValueError:
            raise UnknownTarget(f"{key} is not an exogenous variable of this path") from None

    def between(self, start, end) -> "ExogenousPath":
        i0 = months_between(self.time_index[0], start)
        i1 = months_between(self.time_index[0], end)
        if i0 < 0 or i1 >= len(self) or i1 < i0:
            raise DataError(f"exogenous path does not cover {to_month(start)}..{to_month(end)}")
        sl = slice(i0, i1 + 1)
        raw = None if self.raw_values is None else self.raw_values[sl]
        return replace(self, time_index=self.time_index[sl], values=self.values[sl], raw_values=raw)

    @classmethod
    def from_panel(cls, panel: ObservationPanel) -> "ExogenousPath":
        return cls(
            time_index=panel.time_index,
            values=panel.exogenous,
            raw_values=panel.exogenous_raw,
            exo_order=panel.exo_order,
            transforms=tuple(panel.transform_kind(k) for k in panel.exo_order),
        )


@dataclass(frozen=True)
class ScenarioShock:
    kind: str
    target: SeriesKey
    value: float

    def __post_init__(self):
        if self.kind not in SHOCK_KINDS:
            raise ConfigError(f"unknown shock kind {self.kind!r}")
        if self.kind == "scale_level" and not self.value > 0:
            raise ConfigError("scale_level factor must be positive")
        if self.kind == "set_dummy" and self.value not in (0, 1):
            raise ConfigError("set_dummy value must be 0 or 1")


@dataclass(frozen=True)
class ScenarioResult:
    time_index: np.ndarray
    baseline: np.ndarray
    shocked: np.ndarray
    response: np.ndarray
    shock: ScenarioShock
    start_state: np.ndarray
    labels: tuple[SeriesKey, ...] = ()
    name: str = ""
    exo_baseline: ExogenousPath | None = None
    exo_shocked: ExogenousPath | None = None


BUILTIN_SCENARIOS = {
    "ltro50": ScenarioShock("scale_level", SeriesKey("EA", "ltro"), 0.5),
    "smp50": ScenarioShock("scale_level", SeriesKey("EA", "smp"), 0.5),
    "app50": ScenarioShock("scale_level", SeriesKey("EA", "app"), 0.5),
    "omt_off": ScenarioShock("set_dummy", SeriesKey("EA", "omt_dummy"), 0.0),
}


def forecast(m: GlobalModel, x_start, d_path: ExogenousPath, t0: int) -> np.ndarray:
    """Dynamic forecast with future shocks set to zero.

    Row 0 of ``d_path`` is the month before the first forecast month and only
    supplies d_{t-1}; the result has ``len(d_path) - 1`` rows, the first
    carrying trend value ``t0``.
    """
    if len(d_path) < 2:
        raise MissingLaggedExogenous("exogenous path needs the pre-window month plus at least one forecast month")
    x = np.asarray(x_start, dtype=float).reshape(m.k)
    d = d_path.values
    S = len(d_path) - 1
    out = np.empty((S, m.k))
    for s in range(S):
        x = m.c0 + m.c1 * (t0 + s) + m.F @ x + m.Gamma0 @ d[s + 1] + m.Gamma1 @ d[s]
        out[s] = x
    return out


def apply_shock(d: ExogenousPath, shock: ScenarioShock, include_lag_row: bool = True) -> ExogenousPath:
    """Shock one exogenous column; ``include_lag_row=False`` leaves row 0 as observed."""
    j = d.column_index(shock.target)
    rows = slice(None) if include_lag_row else slice(1, None)
    values = d.values.copy()
    raw = None if d.raw_values is None else d.raw_values.copy()
    if shock.kind == "scale_level":
        if raw is None or not np.all(np.isfinite(raw[:, j])):
            raise TransformMissing(f"no raw levels available to scale {shock.target}")
        raw[rows, j] = raw[rows, j] * shock.value
        values[rows, j] = transform_values(raw[rows, j], d.transforms[j])
    else:
        values[rows, j] = shock.value
        if raw is not None:
            raw[rows, j] = shock.value
    return replace(d, values=values, raw_values=raw)


def default_window(d: ExogenousPath, length: int = DEFAULT_WINDOW_LENGTH) -> tuple[np.datetime64, np.datetime64]:
    end = d.time_index[-1]
    return end - (length - 1), end


def run_scenario(
    m: GlobalModel,
    x_start,
    d_baseline: ExogenousPath,
    shock: ScenarioShock,
    window: Sequence | None = None,
    t0: int | None = None,
    include_lag_row: bool = True,
    name: str = "",
) -> ScenarioResult:
    """Baseline and shocked dynamic forecasts over ``window`` and their difference.

    ``x_start`` is the state in the month before the window. When ``t0`` is
    omitted it is recovered from the model's sample start so the trend keeps
    its estimation-time count.
    """
    start, end = (to_month(w) for w in (window or default_window(d_baseline)))
    path = d_baseline.between(start - 1, end)
    if t0 is None:
        sample_start = m.meta.get("sample_start")
        if sample_start is None:
            raise ConfigError("model has no sample_start; pass t0 explicitly")
        t0 = months_between(sample_start, start)
    shocked_path = apply_shock(path, shock, include_lag_row)
    base = forecast(m, x_start, path, t0)
    shocked = forecast(m, x_start, shocked_path, t0)
    return ScenarioResult(
        time_index=month_range(start, end),
        baseline=base,
        shocked=shocked,
        response=shocked - base,
        shock=shock,
        start_state=np.asarray(x_start, dtype=float).copy(),
        labels=m.global_order,
        name=name,
        exo_baseline=path,
        exo_shocked=shocked_path,
    )


# -- output ------------------------------------------------------------------

def write_scenario_csv(path, result: ScenarioResult) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["month", "country", "variable", "baseline", "shocked", "response"])
        for s, month in enumerate(result.time_index.astype(str)):
            for j, key in enumerate(result.labels):
                writer.writerow([
                    month, key.country, key.variable,
                    format_number(result.baseline[s, j]),
                    format_number(result.shocked[s, j]),
                    format_number(result.response[s, j]),
                ])


def write_exogenous_csv(path, result: ScenarioResult) -> None:
    """Baseline and shocked exogenous paths, pre-window month included."""
    base, shocked = result.exo_baseline, result.exo_shocked
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["month"] + [f"{k}:baseline" for k in base.exo_order] + [f"{k}:shocked" for k in base.exo_order])
        for s, month in enumerate(base.time_index.astype(str)):
            writer.writerow([month] + [format_number(v) for v in base.values[s]] + [format_number(v) for v in shocked.values[s]])


def scenario_summary(result: ScenarioResult) -> dict:
    """Responses at each December inside the window and at the window end."""
    months = result.time_index
    checkpoints = [s for s, mth in enumerate(months) if str(mth).endswith("-12")]
    if len(months) - 1 not in checkpoints:
        checkpoints.append(len(months) - 1)
    return {
        "scenario": result.name,
        "shock": {"kind": result.shock.kind, "target": str(result.shock.target), "value": result.shock.value},
        "window": [str(months[0]), str(months[-1])],
        "months": int(len(months)),
        "labels": [str(k) for k in result.labels],
        "checkpoints": {
            str(months[s]): dict(zip((str(k) for k in result.labels), result.response[s].tolist()))
            for s in checkpoints
        },
        "end_of_window_response": dict(zip((str(k) for k in result.labels), result.response[-1].tolist())),
    }


def write_scenario_summary(path, result: ScenarioResult) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(scenario_summary(result), indent=1) + "\n", encoding="utf-8")
