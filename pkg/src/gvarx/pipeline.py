"""Config-driven glue: load data, estimate, and (de)serialize a fitted run."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .config import ModelConfig
from .errors import DataError
from .global_model import GlobalModel, assemble, model_from_dict, model_to_dict, reduce
from .linkage import LinkMatrix, build_link_matrix, normalize_weights, read_exposure_csv
from .scenario import ExogenousPath
from .timeseries import ObservationPanel, SeriesKey, aggregate_to_monthly, align_panel, read_series_csv
from .varx import VarxEstimate, build_regressor_matrix, estimate_varx

FORMAT_VERSION = 1


@dataclass(frozen=True)
class FittedRun:
    model: GlobalModel
    estimates: dict[str, VarxEstimate]
    link_matrices: dict[str, LinkMatrix]
    panel: ObservationPanel


def load_panel(cfg: ModelConfig) -> ObservationPanel:
    keys = cfg.global_order + cfg.exogenous
    monthly = [aggregate_to_monthly(read_series_csv(cfg.series_path(k), k)) for k in keys]
    return align_panel(monthly, cfg.sample, cfg.global_order, cfg.exogenous, cfg.transform_map())


def link_matrices(cfg: ModelConfig) -> dict[str, LinkMatrix]:
    weights = normalize_weights(read_exposure_csv(cfg.exposure_file))
    return {c.country: build_link_matrix(c, weights, cfg.global_order) for c in cfg.countries}


def fit(cfg: ModelConfig, panel: ObservationPanel | None = None) -> FittedRun:
    cfg.validate_data()
    panel = load_panel(cfg) if panel is None else panel
    lms = link_matrices(cfg)
    estimates = {}
    for spec in cfg.countries:
        block = build_regressor_matrix(panel, spec, lms[spec.country])
        estimates[spec.country] = estimate_varx(block)
    system = assemble(estimates, lms, cfg.global_order, cfg.exogenous)
    meta = {
        "sample_start": str(cfg.sample[0]),
        "sample_end": str(cfg.sample[1]),
        "countries": [c.country for c in cfg.countries],
        "foreign": {c.country: list(c.foreign_vars) for c in cfg.countries},
    }
    return FittedRun(reduce(system, meta), estimates, lms, panel)


def panel_to_dict(panel: ObservationPanel) -> dict:
    return {
        "months": panel.time_index.astype(str).tolist(),
        "endo_order": [str(k) for k in panel.endo_order],
        "exo_order": [str(k) for k in panel.exo_order],
        "transforms": {str(t.applied_to): t.kind for t in panel.transforms},
        "endogenous": panel.endogenous.tolist(),
        "exogenous": panel.exogenous.tolist(),
        "exogenous_raw": panel.exogenous_raw.tolist() if panel.exogenous_raw is not None else None,
    }


def run_to_dict(run: FittedRun) -> dict:
    doc = {"format_version": FORMAT_VERSION}
    doc.update(model_to_dict(run.model))
    doc["link_matrices"] = {c: lm.W.tolist() for c, lm in run.link_matrices.items()}
    doc["estimates"] = [run.estimates[c].to_dict() for c in run.estimates]
    doc["panel"] = panel_to_dict(run.panel)
    return doc


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


@dataclass(frozen=True)
class StoredRun:
    model: GlobalModel
    months: np.ndarray
    endogenous: np.ndarray
    exogenous: ExogenousPath
    doc: dict

    def state_at(self, month) -> np.ndarray:
        i = int((np.datetime64(month, "M") - self.months[0]).astype(int))
        if not 0 <= i < self.months.size:
            raise DataError(f"no observed state for {month}")
        return self.endogenous[i].copy()


def run_from_dict(doc: dict) -> StoredRun:
    model = model_from_dict(doc)
    p = doc["panel"]
    months = np.array(p["months"], dtype="datetime64[M]")
    exo_order = tuple(SeriesKey.parse(s) for s in p["exo_order"])
    S, m = months.size, len(exo_order)
    raw = p.get("exogenous_raw")
    path = ExogenousPath(
        time_index=months,
        values=np.array(p["exogenous"], dtype=float).reshape(S, m),
        raw_values=None if raw is None else np.array(raw, dtype=float).reshape(S, m),
        exo_order=exo_order,
        transforms=tuple(p["transforms"].get(str(k), "level") for k in exo_order),
    )
    endo = np.array(p["endogenous"], dtype=float).reshape(S, model.k)
    return StoredRun(model, months, endo, path, doc)
