"""Run configuration: a single YAML file, validated before any computation.

Layout (all paths relative to the file's own directory)::

    data_dir: data
    exposure_file: data/exposure.csv
    sample: [2006-01, 2017-03]
    countries:
      - {name: DE, domestic: [repo_rate, repo_vol, gov_yield, cds]}
      - {name: ES, domestic: [gov_yield, cds], foreign: [repo_rate, repo_vol, gov_yield, cds]}
    exogenous: [EA.policy_rate, EA.ltro, EA.smp, EA.app, EA.omt_dummy]
    transforms: {repo_vol: log, ltro: log1p, omt_dummy: none}
    girf: {horizon: 24, sigma: structural, shocks: all, mc_draws: 100000}
    scenario:
      window: [2015-01, 2017-03]
      shock_lag_row: true
      definitions:
        ltro25: {kind: scale_level, target: EA.ltro, value: 0.25}
    seed: 0
    synth: {noise_sd: 0.01}

``foreign`` defaults to every variable type that appears domestically
anywhere. Transform keys are either a variable name or a full ``CC.var``
key; the full key wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, DataError, MissingSeries, UnknownScenario, UnknownTarget
from .girf import DEFAULT_HORIZON, SIGMA_MODES
from .linkage import CountrySpec, build_link_matrix, normalize_weights, read_exposure_csv
from .scenario import BUILTIN_SCENARIOS, ScenarioShock
from .synthdata import DgpSpec
from .timeseries import TRANSFORM_KINDS, SeriesKey, TransformSpec, month_range, series_filename, to_month

_TOP_KEYS = {"data_dir", "exposure_file", "sample", "countries", "exogenous", "transforms", "girf", "scenario", "seed", "synth"}
_SYNTH_KEYS = {f.name for f in fields(DgpSpec)} - {"countries", "exogenous", "T", "start", "seed"}


@dataclass(frozen=True)
class ModelConfig:
    base_dir: Path
    data_dir: Path
    exposure_file: Path
    sample: tuple[np.datetime64, np.datetime64]
    countries: tuple[CountrySpec, ...]
    exogenous: tuple[SeriesKey, ...] = ()
    transforms: dict = field(default_factory=dict)
    girf_horizon: int = DEFAULT_HORIZON
    girf_sigma: str = "structural"
    girf_shocks: tuple[SeriesKey, ...] | None = None
    mc_draws: int = 100_000
    scenario_window: tuple[np.datetime64, np.datetime64] | None = None
    shock_lag_row: bool = True
    scenarios: dict = field(default_factory=dict)
    seed: int = 0
    synth: dict = field(default_factory=dict)

    @property
    def global_order(self) -> tuple[SeriesKey, ...]:
        return tuple(k for c in self.countries for k in c.domestic_keys)

    @property
    def T(self) -> int:
        return month_range(*self.sample).size

    def transform_for(self, key: SeriesKey) -> TransformSpec:
        kind = self.transforms.get(str(key), self.transforms.get(key.variable, "level"))
        return TransformSpec(kind, key)

    def transform_map(self) -> dict[SeriesKey, TransformSpec]:
        return {k: self.transform_for(k) for k in self.global_order + self.exogenous}

    def series_path(self, key: SeriesKey) -> Path:
        return self.data_dir / series_filename(key)

    def scenario(self, name: str) -> ScenarioShock:
        if name not in self.scenarios:
            raise UnknownScenario(f"scenario {name!r} not defined; known: {', '.join(self.scenarios)}")
        return self.scenarios[name]

    def without_foreign(self, country: str, variables) -> "ModelConfig":
        """Drop foreign variables from one country's model definition."""
        variables = set(variables)
        out = []
        found = False
        for c in self.countries:
            if c.country == country:
                found = True
                c = CountrySpec(c.country, c.domestic_vars, tuple(v for v in c.foreign_vars if v not in variables))
            out.append(c)
        if not found:
            raise ConfigError(f"unknown country {country!r}")
        return replace(self, countries=tuple(out))

    def dgp_spec(self, seed: int | None = None) -> DgpSpec:
        exo_vars = tuple(k.variable for k in self.exogenous)
        return DgpSpec(
            countries=self.countries,
            exogenous=exo_vars,
            T=self.T,
            start=str(self.sample[0]),
            seed=self.seed if seed is None else seed,
            **self.synth,
        )

    def validate_data(self) -> None:
        """Check that every series file and the exposure matrix resolve."""
        for key in self.global_order + self.exogenous:
            if not self.series_path(key).exists():
                raise MissingSeries(key)
        exposure = read_exposure_csv(self.exposure_file)
        missing = [c.country for c in self.countries if c.country not in exposure.countries]
        if missing:
            raise ConfigError(f"exposure file lacks countries {missing}")
        weights = normalize_weights(exposure)
        for c in self.countries:
            build_link_matrix(c, weights, self.global_order)


def _months(value, what: str) -> np.datetime64:
    try:
        return to_month(str(value))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{what}: cannot read month {value!r}") from exc


def _pair(value, what: str):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{what} must be a [start, end] pair")
    start, end = (_months(v, what) for v in value)
    if end < start:
        raise ConfigError(f"{what}: end precedes start")
    return start, end


def _key(text, what: str) -> SeriesKey:
    try:
        return SeriesKey.parse(str(text))
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def _str_list(value, what: str) -> tuple[str, ...]:
    if not isinstance(value, (list, tuple)) or not all(isinstance(v, str) for v in value):
        raise ConfigError(f"{what} must be a list of names")
    return tuple(value)


def _shock(name: str, body) -> ScenarioShock:
    if not isinstance(body, dict) or set(body) != {"kind", "target", "value"}:
        raise ConfigError(f"scenario {name!r} needs exactly kind, target and value")
    return ScenarioShock(str(body["kind"]), _key(body["target"], f"scenario {name}"), float(body["value"]))


def parse_config(raw: dict, base_dir) -> ModelConfig:
    base_dir = Path(base_dir)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    for required in ("sample", "countries"):
        if required not in raw:
            raise ConfigError(f"config is missing {required!r}")

    data_dir = base_dir / str(raw.get("data_dir", "data"))
    exposure_file = base_dir / str(raw["exposure_file"]) if "exposure_file" in raw else data_dir / "exposure.csv"
    sample = _pair(raw["sample"], "sample")

    entries = raw["countries"]
    if not isinstance(entries, list) or not entries:
        raise ConfigError("countries must be a non-empty list")
    seen_vars: dict[str, None] = {}
    for entry in entries:
        if not isinstance(entry, dict) or "name" not in entry or "domestic" not in entry:
            raise ConfigError(f"country entry {entry!r} needs name and domestic")
        for v in _str_list(entry["domestic"], f"{entry['name']}.domestic"):
            seen_vars.setdefault(v)
    countries = []
    for entry in entries:
        extra = set(entry) - {"name", "domestic", "foreign"}
        if extra:
            raise ConfigError(f"country {entry['name']}: unknown keys {sorted(extra)}")
        name = str(entry["name"])
        domestic = _str_list(entry["domestic"], f"{name}.domestic")
        foreign = _str_list(entry.get("foreign", list(seen_vars)), f"{name}.foreign")
        try:
            countries.append(CountrySpec(name, domestic, foreign))
        except DataError as exc:
            raise ConfigError(str(exc)) from exc
    names = [c.country for c in countries]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate country names")

    exogenous = tuple(_key(k, "exogenous") for k in raw.get("exogenous", []))
    if len(set(exogenous)) != len(exogenous):
        raise ConfigError("duplicate exogenous keys")

    transforms = raw.get("transforms", {}) or {}
    if not isinstance(transforms, dict):
        raise ConfigError("transforms must be a mapping")
    transforms = {str(k): str(v) for k, v in transforms.items()}
    for k, v in transforms.items():
        if v not in TRANSFORM_KINDS:
            raise ConfigError(f"transform for {k}: unknown kind {v!r}")

    girf = raw.get("girf", {}) or {}
    extra = set(girf) - {"horizon", "sigma", "shocks", "mc_draws"}
    if extra:
        raise ConfigError(f"girf: unknown keys {sorted(extra)}")
    horizon = int(girf.get("horizon", DEFAULT_HORIZON))
    if horizon < 0:
        raise ConfigError("girf horizon must be nonnegative")
    sigma = str(girf.get("sigma", "structural"))
    if sigma not in SIGMA_MODES:
        raise ConfigError(f"girf sigma must be one of {SIGMA_MODES}")
    shocks = girf.get("shocks", "all")
    girf_shocks = None if shocks == "all" else tuple(_key(k, "girf.shocks") for k in shocks)
    mc_draws = int(girf.get("mc_draws", 100_000))
    if mc_draws < 1:
        raise ConfigError("mc_draws must be positive")

    scen = raw.get("scenario", {}) or {}
    extra = set(scen) - {"window", "shock_lag_row", "definitions"}
    if extra:
        raise ConfigError(f"scenario: unknown keys {sorted(extra)}")
    window = _pair(scen["window"], "scenario.window") if "window" in scen else None
    scenarios = dict(BUILTIN_SCENARIOS)
    for name, body in (scen.get("definitions") or {}).items():
        scenarios[str(name)] = _shock(str(name), body)

    synth = raw.get("synth", {}) or {}
    extra = set(synth) - _SYNTH_KEYS
    if extra:
        raise ConfigError(f"synth: unknown keys {sorted(extra)}")

    cfg = ModelConfig(
        base_dir=base_dir,
        data_dir=data_dir,
        exposure_file=exposure_file,
        sample=sample,
        countries=tuple(countries),
        exogenous=exogenous,
        transforms=transforms,
        girf_horizon=horizon,
        girf_sigma=sigma,
        girf_shocks=girf_shocks,
        mc_draws=mc_draws,
        scenario_window=window,
        shock_lag_row=bool(scen.get("shock_lag_row", True)),
        scenarios=scenarios,
        seed=int(raw.get("seed", 0)),
        synth=dict(synth),
    )
    _check_references(cfg)
    return cfg


def _check_references(cfg: ModelConfig) -> None:
    endo = set(cfg.global_order)
    if cfg.girf_shocks is not None:
        for k in cfg.girf_shocks:
            if k not in endo:
                raise ConfigError(f"girf shock {k} is not an endogenous variable")
    exo = set(cfg.exogenous)
    for name, shock in cfg.scenarios.items():
        if name in BUILTIN_SCENARIOS and shock.target not in exo:
            continue  # built-ins only apply when their target is configured
        if shock.target not in exo:
            raise UnknownTarget(f"scenario {name}: {shock.target} is not an exogenous variable")
    if cfg.scenario_window is not None:
        start, end = cfg.scenario_window
        if start - 1 < cfg.sample[0] or end > cfg.sample[1]:
            raise ConfigError("scenario window (plus its pre-window month) must lie inside the sample")


def load_config(path) -> ModelConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw, path.parent)


def reference_layout_config(base_dir, data_dir: str = "data") -> dict:
    """Raw config for the four-country, five-programme layout used in the synthetic fixtures."""
    from .synthdata import CORE_VARS, EXO_COUNTRY, EXO_VARS, TRANSFORMS

    return {
        "data_dir": data_dir,
        "exposure_file": f"{data_dir}/exposure.csv",
        "sample": ["2006-01", "2017-03"],
        "countries": [
            {"name": "DE", "domestic": list(CORE_VARS)},
            {"name": "FR", "domestic": list(CORE_VARS)},
            {"name": "IT", "domestic": list(CORE_VARS)},
            {"name": "ES", "domestic": ["gov_yield", "cds"], "foreign": list(CORE_VARS)},
        ],
        "exogenous": [f"{EXO_COUNTRY}.{v}" for v in EXO_VARS],
        "transforms": dict(TRANSFORMS),
        "girf": {"horizon": DEFAULT_HORIZON, "sigma": "structural", "shocks": "all", "mc_draws": 100_000},
        "scenario": {"window": ["2015-01", "2017-03"], "shock_lag_row": True},
        "seed": 0,
    }


def dump_config(raw: dict) -> str:
    return yaml.safe_dump(raw, sort_keys=False, default_flow_style=None)
