"""Command-line front end: ``gvarx gen-synth | estimate | girf | scenario``."""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
from pathlib import Path

from . import pipeline
from .config import ModelConfig, dump_config, load_config, reference_layout_config, parse_config
from .errors import ConfigError, GvarError, UnknownScenario
from .girf import SIGMA_MODES, girf_closed_form, girf_monte_carlo, response_to_dict, write_response_csv
from .scenario import BUILTIN_SCENARIOS, ExogenousPath, run_scenario, scenario_summary, write_exogenous_csv, write_scenario_csv
from .synthdata import generate, write_dataset
from .timeseries import SeriesKey, to_month

REPO_VARS = ("repo_rate", "repo_vol")


class Staging:
    """Collect outputs in a scratch directory and move them into place only on success."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self._tmp: Path | None = None
        self.names: list[str] = []

    def __enter__(self) -> "Staging":
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._tmp = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.out_dir))
        return self

    @property
    def root(self) -> Path:
        return self._tmp

    def adopt(self, path: Path) -> None:
        self.names.append(str(Path(path).relative_to(self._tmp)))

    def path(self, name: str) -> Path:
        p = self._tmp / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.names.append(name)
        return p

    def write_text(self, name: str, text: str) -> None:
        self.path(name).write_text(text, encoding="utf-8")

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is None:
                for name in self.names:
                    target = self.out_dir / name
                    target.parent.mkdir(parents=True, exist_ok=True)
                    os.replace(self._tmp / name, target)
        finally:
            shutil.rmtree(self._tmp, ignore_errors=True)
        return False


def _key_slug(key: SeriesKey) -> str:
    return f"{key.country}_{key.variable}"


def _load_cfg(args) -> ModelConfig | None:
    if args.config is None:
        return None
    cfg = load_config(args.config)
    for country in args.no_foreign_repo_for or ():
        cfg = cfg.without_foreign(country, REPO_VARS)
    return cfg


def _require_cfg(args) -> ModelConfig:
    cfg = _load_cfg(args)
    if cfg is None:
        raise ConfigError(f"{args.command} needs --config")
    return cfg


def _load_model(args) -> pipeline.StoredRun:
    path = Path(args.model) if args.model else Path(args.out_dir) / "model.json"
    if not path.exists():
        raise ConfigError(f"model file {path} not found; run estimate first")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        return pipeline.run_from_dict(doc)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: not a model file ({exc})") from exc


# -- commands -----------------------------------------------------------------

def cmd_gen_synth(args) -> int:
    out = Path(args.out_dir)
    cfg = _load_cfg(args)
    if cfg is None:
        raw = reference_layout_config(out)
        if args.seed is not None:
            raw["seed"] = args.seed
        cfg = parse_config(raw, out)
        for country in args.no_foreign_repo_for or ():
            cfg = cfg.without_foreign(country, REPO_VARS)
        config_text = dump_config(raw)
    else:
        config_text = None
    seed = cfg.seed if args.seed is None else args.seed
    data = generate(cfg.dgp_spec(seed), frequency=args.frequency)

    data_dir = cfg.data_dir
    with Staging(data_dir) as stage:
        for p in write_dataset(data, stage.root):
            stage.adopt(p)
        truth = {
            "seed": seed,
            "spectral_radius": data.model.spectral_radius,
            "countries": {c: e.to_dict() for c, e in data.truth.items()},
        }
        stage.write_text("truth.json", pipeline.dumps(truth))
    if config_text is not None:
        with Staging(out) as stage:
            stage.write_text("config.yaml", config_text)
    print(f"wrote {len(data.raw_series)} series to {data_dir}")
    return 0


def estimation_report(run: pipeline.FittedRun) -> dict:
    m = run.model
    report = {
        "spectral_radius": m.spectral_radius,
        "stable": m.stable,
        "condition_number_G": m.condition_number,
        "k": m.k,
        "m": m.m,
        "sample": [m.meta.get("sample_start"), m.meta.get("sample_end")],
        "countries": [run.estimates[c].to_dict() for c in run.estimates],
        "warnings": [],
    }
    if not m.stable:
        report["warnings"].append(f"global model is unstable: spectral radius {m.spectral_radius:.6g} >= 1")
    return report


def _coefficient_table(e) -> str:
    labels = list(e.column_labels)
    width = max(len(s) for s in labels) + 2
    lines = [f"== {e.country} (n = {e.residuals.shape[0]}) =="]
    lines.append(" " * width + "".join(f"{str(r):>22}" for r in e.row_labels))
    for j, lab in enumerate(labels):
        lines.append(f"{lab:<{width}}" + "".join(f"{v:>22.10g}" for v in e.coefficients[:, j]))
    return "\n".join(lines)


def cmd_estimate(args) -> int:
    cfg = _require_cfg(args)
    run = pipeline.fit(cfg)
    report = estimation_report(run)
    text = [_coefficient_table(run.estimates[c]) for c in run.estimates]
    text.append(f"spectral radius {run.model.spectral_radius:.10g}")
    text.append(f"condition number of G {run.model.condition_number:.10g}")
    text.append(f"stable {str(run.model.stable).lower()}")
    with Staging(Path(args.out_dir)) as stage:
        stage.write_text("model.json", pipeline.dumps(pipeline.run_to_dict(run)))
        stage.write_text("estimation_report.json", pipeline.dumps(report))
        stage.write_text("estimation_report.txt", "\n\n".join(text) + "\n")
    for w in report["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    print(f"spectral radius {run.model.spectral_radius:.6g}, cond(G) {run.model.condition_number:.6g}, stable {str(run.model.stable).lower()}")
    return 0


def cmd_girf(args) -> int:
    cfg = _load_cfg(args)
    stored = _load_model(args)
    m = stored.model
    horizon = args.horizon if args.horizon is not None else (cfg.girf_horizon if cfg else 24)
    sigma = args.girf_sigma or (cfg.girf_sigma if cfg else "structural")
    draws = args.draws or (cfg.mc_draws if cfg else 100_000)
    seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
    if args.shock:
        shocks = []
        for s in args.shock:
            try:
                shocks.append(SeriesKey.parse(s))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
    elif cfg is not None and cfg.girf_shocks is not None:
        shocks = list(cfg.girf_shocks)
    else:
        shocks = list(m.global_order)
    paths = []
    for key in dict.fromkeys(shocks):
        if args.mode == "mc":
            paths.append(girf_monte_carlo(m, key, horizon, draws=draws, seed=seed, sigma_mode=sigma))
        else:
            paths.append(girf_closed_form(m, key, horizon, sigma))
    with Staging(Path(args.out_dir)) as stage:
        for p in paths:
            stem = f"girf/{args.mode}_{_key_slug(p.shocked)}"
            write_response_csv(stage.path(stem + ".csv"), p)
            doc = response_to_dict(p)
            doc.update({"mode": args.mode, "sigma": sigma})
            if args.mode == "mc":
                doc.update({"draws": draws, "seed": seed})
            stage.write_text(stem + ".json", pipeline.dumps(doc))
    print(f"wrote {len(paths)} response paths ({args.mode}, horizon {horizon})")
    return 0


def cmd_scenario(args) -> int:
    cfg = _load_cfg(args)
    stored = _load_model(args)
    scenarios = cfg.scenarios if cfg is not None else dict(BUILTIN_SCENARIOS)
    if args.name == "all":
        names = [n for n, s in scenarios.items() if s.target in stored.exogenous.exo_order]
    else:
        if cfg is not None:
            cfg.scenario(args.name)
        elif args.name not in scenarios:
            raise UnknownScenario(f"scenario {args.name!r} not defined")
        names = [args.name]

    if args.window:
        window = tuple(to_month(w) for w in args.window)
    elif cfg is not None and cfg.scenario_window is not None:
        window = cfg.scenario_window
    else:
        window = None
    lag_row = cfg.shock_lag_row if cfg is not None else True
    if args.no_lag_shock:
        lag_row = False

    results = []
    for name in names:
        d: ExogenousPath = stored.exogenous
        start = window[0] if window else d.time_index[-1] - 26
        x0 = stored.state_at(start - 1)
        results.append(run_scenario(stored.model, x0, d, scenarios[name], window, include_lag_row=lag_row, name=name))
    with Staging(Path(args.out_dir)) as stage:
        for r in results:
            write_scenario_csv(stage.path(f"scenarios/{r.name}.csv"), r)
            write_exogenous_csv(stage.path(f"scenarios/{r.name}_exogenous.csv"), r)
            summary = scenario_summary(r)
            summary["shock_lag_row"] = lag_row
            stage.write_text(f"scenarios/{r.name}_summary.json", pipeline.dumps(summary))
    print(f"wrote {len(results)} scenarios")
    return 0


# -- parser -------------------------------------------------------------------

def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=d(None), help="YAML run configuration")
    p.add_argument("--seed", type=int, default=d(None), help="override the configured seed")
    p.add_argument("--out-dir", default=d("out"), help="output directory (default: out)")
    p.add_argument("--girf-sigma", choices=SIGMA_MODES, default=d(None), help="covariance used by the GIRF")
    p.add_argument(
        "--no-foreign-repo-for", action="append", default=d(None), metavar="COUNTRY",
        help="drop foreign repo variables from a country's model (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gvarx", description="Global VAR estimation, GIRFs and policy scenarios.")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-synth", parents=[common], help="write a synthetic dataset")
    g.add_argument("--frequency", choices=("daily", "monthly"), default="daily")
    g.set_defaults(func=cmd_gen_synth)

    e = sub.add_parser("estimate", parents=[common], help="estimate country models and the global system")
    e.set_defaults(func=cmd_estimate)

    r = sub.add_parser("girf", parents=[common], help="generalized impulse responses")
    r.add_argument("--model", help="model JSON (default: OUT_DIR/model.json)")
    r.add_argument("--shock", action="append", metavar="KEY", help="shocked variable, e.g. IT.gov_yield (repeatable; default all)")
    r.add_argument("--horizon", type=int)
    r.add_argument("--mode", choices=("closed", "mc"), default="closed")
    r.add_argument("--draws", type=int)
    r.set_defaults(func=cmd_girf)

    s = sub.add_parser("scenario", parents=[common], help="counterfactual programme scenarios")
    s.add_argument("name", nargs="?", default="all", help="scenario name or 'all'")
    s.add_argument("--model", help="model JSON (default: OUT_DIR/model.json)")
    s.add_argument("--window", nargs=2, metavar=("START", "END"))
    s.add_argument("--no-lag-shock", action="store_true", help="leave the pre-window exogenous value unshocked")
    s.set_defaults(func=cmd_scenario)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GvarError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
