"""Synthetic data from a known, stable GVAR data-generating process.

The process is simulated at monthly frequency and then expanded to daily
(business-day) or weekly observations carrying a small within-month dither
whose monthly mean is zero, so monthly averaging recovers the latent values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import SingularG, UnstableSpec
from .global_model import GlobalModel, assemble, reduce
from .linkage import CountrySpec, ExposureMatrix, LinkMatrix, build_link_matrix, normalize_weights, write_exposure_csv
from .timeseries import (
    ObservationPanel,
    RawSeries,
    SeriesKey,
    TransformSpec,
    inverse_transform_values,
    month_range,
    series_filename,
    transform_values,
    write_series_csv,
)
from .varx import VarxEstimate

CORE_VARS = ("repo_rate", "repo_vol", "gov_yield", "cds")
EXO_VARS = ("policy_rate", "ltro", "smp", "app", "omt_dummy")
EXO_COUNTRY = "EA"

TRANSFORMS = {
    "repo_vol": "log",
    "ltro": "log1p",
    "smp": "log1p",
    "app": "log1p",
    "omt_dummy": "none",
}
WEEKLY_VARS = ("ltro", "smp", "app")
UNITS = {
    "repo_rate": "percent",
    "repo_vol": "EUR bn",
    "gov_yield": "percent",
    "cds": "basis points",
    "policy_rate": "percent",
    "ltro": "EUR bn",
    "smp": "EUR bn",
    "app": "EUR bn",
    "omt_dummy": "dimensionless",
}
# long-run means in transformed units
_TARGET_MEANS = {"repo_rate": 1.0, "repo_vol": 3.0, "gov_yield": 3.0, "cds": 1.5}


def reference_countries() -> tuple[CountrySpec, ...]:
    """Four-country layout: Spain carries no domestic repo series."""
    return (
        CountrySpec("DE", CORE_VARS, CORE_VARS),
        CountrySpec("FR", CORE_VARS, CORE_VARS),
        CountrySpec("IT", CORE_VARS, CORE_VARS),
        CountrySpec("ES", ("gov_yield", "cds"), CORE_VARS),
    )


@dataclass(frozen=True)
class DgpSpec:
    countries: tuple[CountrySpec, ...] = field(default_factory=reference_countries)
    exogenous: tuple[str, ...] = EXO_VARS
    T: int = 135
    start: str = "2006-01"
    seed: int = 0
    noise_sd: float = 0.01
    max_radius: float = 0.95
    phi_scale: float = 0.3
    lambda_scale: float = 0.25
    shock_corr: float = 0.3
    factor_sd: float = 0.1
    programme_level: float = 1.0
    centered: bool = True
    psi_scale: float = 0.3
    trend_scale: float = 1e-4
    dummy_switch_prob: float = 0.05
    dither: float = 1e-4
    burn_in: int = 200

    @property
    def global_order(self) -> tuple[SeriesKey, ...]:
        return tuple(k for c in self.countries for k in c.domestic_keys)

    @property
    def exo_order(self) -> tuple[SeriesKey, ...]:
        return tuple(SeriesKey(EXO_COUNTRY, v) for v in self.exogenous)

    @property
    def months(self) -> np.ndarray:
        start = np.datetime64(self.start, "M")
        return month_range(start, start + (self.T - 1))


@dataclass(frozen=True)
class SynthData:
    spec: DgpSpec
    exposure: ExposureMatrix
    link_matrices: dict[str, LinkMatrix]
    truth: dict[str, VarxEstimate]
    model: GlobalModel
    panel: ObservationPanel
    raw_series: tuple[RawSeries, ...]
    transforms: dict[SeriesKey, TransformSpec]


def _draw_exposure(rng, countries) -> ExposureMatrix:
    n = len(countries)
    e = rng.uniform(1.0, 10.0, size=(n, n))
    np.fill_diagonal(e, 0.0)
    return ExposureMatrix(tuple(c.country for c in countries), np.round(e, 3))


def _simulate_exogenous(rng, spec: DgpSpec, n: int) -> np.ndarray:
    """Raw monthly levels for the common exogenous block, burn-in included."""
    raw = np.empty((n, len(spec.exogenous)))
    for j, var in enumerate(spec.exogenous):
        if var == "omt_dummy":
            state, col = 0.0, np.empty(n)
            for t in range(n):
                if rng.uniform() < spec.dummy_switch_prob:
                    state = 1.0 - state
                col[t] = state
        elif var in ("ltro", "smp", "app"):
            y = np.empty(n)
            level = spec.programme_level
            y[0] = level
            shocks = rng.normal(0.0, 0.6, n)
            for t in range(1, n):
                y[t] = level + 0.8 * (y[t - 1] - level) + shocks[t]
            y = np.maximum(y, 0.0)
            if var == "app":
                # programme inactive over an initial stretch: exact zeros
                y[: spec.burn_in + spec.T // 4] = 0.0
            col = np.expm1(y)
        else:
            col = np.empty(n)
            col[0] = 0.0
            shocks = rng.normal(0.0, 0.3, n)
            for t in range(1, n):
                col[t] = 0.9 * col[t - 1] + shocks[t]
        raw[:, j] = col
    return raw


def _expand(rng, key: SeriesKey, months: np.ndarray, monthly: np.ndarray, kind: str, spec: DgpSpec) -> RawSeries:
    first = months[0].astype("datetime64[D]")
    last = (months[-1] + 1).astype("datetime64[D]")
    days = np.arange(first, last, dtype="datetime64[D]")
    weekday = (days.astype(np.int64) + 3) % 7  # 1970-01-01 was a Thursday
    keep = weekday == 4 if key.variable in WEEKLY_VARS else weekday < 5
    days = days[keep]
    idx = (days.astype("datetime64[M]") - months[0]).astype(np.int64)
    base = monthly[idx]
    if kind == "none" or spec.dither == 0:
        return RawSeries(key, days, base, UNITS.get(key.variable, ""))
    u = rng.uniform(-1.0, 1.0, days.size)
    u -= (np.bincount(idx, weights=u) / np.bincount(idx))[idx]
    if kind in ("log", "log1p"):
        values = base * (1.0 + spec.dither * u)
    else:
        values = base + spec.dither * u
    return RawSeries(key, days, values, UNITS.get(key.variable, ""))


def generate(spec: DgpSpec = DgpSpec(), frequency: str = "daily") -> SynthData:
    """Draw a stable DGP, simulate it, and expand to raw higher-frequency series.

    ``frequency="monthly"`` skips the expansion (raw series are then the
    monthly levels themselves), which is much cheaper for long samples.
    """
    root = np.random.SeedSequence(spec.seed)
    s_coef, s_exo, s_noise, s_expand = root.spawn(4)
    rng = np.random.default_rng(s_coef)

    exposure = _draw_exposure(rng, spec.countries)
    weights = normalize_weights(exposure)
    order = spec.global_order
    k, m = len(order), len(spec.exogenous)
    lms = {c.country: build_link_matrix(c, weights, order) for c in spec.countries}

    # Reduced-form shocks eps ~ N(0, sd^2 C): one cross-country factor per
    # variable type plus correlated idiosyncratic terms. Each contemporaneous
    # loading is the projection of eps_i on eps*_i, which leaves
    # nu_i = eps_i - Lambda0_i eps*_i orthogonal to the foreign regressors, so
    # weak exogeneity holds by construction.
    A = rng.normal(0.0, spec.shock_corr, (k, k))
    idio = A @ A.T + np.eye(k)
    idio = idio / np.sqrt(np.outer(np.diag(idio), np.diag(idio)))
    ratio = spec.factor_sd / 0.01
    C = idio.copy()
    for var in dict.fromkeys(key.variable for key in order):
        loading = np.array([rng.uniform(0.5, 1.5) if key.variable == var else 0.0 for key in order]) * ratio
        C += np.outer(loading, loading)
    bounds = np.cumsum([0] + [c.k for c in spec.countries])
    parts = {c.country: slice(bounds[i], bounds[i + 1]) for i, c in enumerate(spec.countries)}

    blocks = {}
    for c in spec.countries:
        Wf = lms[c.country].foreign
        cov_xf = C[parts[c.country]] @ Wf.T
        cov_ff = Wf @ C @ Wf.T
        blocks[c.country] = {
            "Phi": rng.normal(0.0, spec.phi_scale, (c.k, c.k)),
            "Lambda0": np.linalg.solve(cov_ff, cov_xf.T).T,
            "Lambda1": rng.uniform(-spec.lambda_scale, spec.lambda_scale, (c.k, c.k_star)),
        }

    G = np.vstack([np.hstack([np.eye(c.k), -blocks[c.country]["Lambda0"]]) @ lms[c.country].W for c in spec.countries])
    H = np.vstack([np.hstack([blocks[c.country]["Phi"], blocks[c.country]["Lambda1"]]) @ lms[c.country].W for c in spec.countries])
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > 1e8:
        raise UnstableSpec(f"drawn contemporaneous structure is near singular (cond {cond:.2e})")
    radius = float(np.max(np.abs(np.linalg.eigvals(np.linalg.solve(G, H)))))
    if not np.isfinite(radius):
        raise UnstableSpec("spectral radius of drawn system is not finite")
    if radius > spec.max_radius:
        # F is linear in H, so this lands exactly on the bound
        factor = spec.max_radius / radius * (1 - 1e-9)
        for c in spec.countries:
            blocks[c.country]["Phi"] *= factor
            blocks[c.country]["Lambda1"] *= factor
        H = H * factor

    # exogenous block and intercepts chosen so variables fluctuate around target means
    n = spec.burn_in + spec.T
    exo_raw = _simulate_exogenous(np.random.default_rng(s_exo), spec, n)
    kinds = [TRANSFORMS.get(v, "level") for v in spec.exogenous]
    d = np.column_stack([transform_values(exo_raw[:, j], kinds[j]) for j in range(m)])
    # exogenous and trend loadings are drawn in reduced form (Psi is
    # unrestricted, so Psi = G Gamma maps them back exactly)
    Gamma0 = rng.normal(0.0, spec.psi_scale, (k, m))
    Gamma1 = rng.normal(0.0, spec.psi_scale, (k, m))
    c1 = rng.uniform(-spec.trend_scale, spec.trend_scale, k)
    Psi0, Psi1, a1 = G @ Gamma0, G @ Gamma1, G @ c1
    Ginv = np.linalg.inv(G)
    F = Ginv @ H
    # centered targets keep regressor means small, which sharpens the intercepts
    means = {} if spec.centered else _TARGET_MEANS
    mu = np.array([means.get(key.variable, 0.0) for key in order])
    t_mid = (spec.T - 1) / 2.0
    c0 = (np.eye(k) - F) @ mu - (Gamma0 + Gamma1) @ d.mean(axis=0) - c1 * t_mid
    a0 = G @ c0

    # reduced-form simulation; omega is scaled so the structural errors
    # nu_t = G eps_t have average variance noise_sd^2
    omega = C * spec.noise_sd**2 / np.mean(np.diag(G @ C @ G.T))
    z = np.random.default_rng(s_noise).standard_normal((n, k))
    eps = z @ np.linalg.cholesky(omega).T if spec.noise_sd > 0 else np.zeros((n, k))
    x = np.zeros((n, k))
    x[0] = mu
    for t in range(1, n):
        trend = t - spec.burn_in
        x[t] = c0 + c1 * trend + F @ x[t - 1] + Gamma0 @ d[t] + Gamma1 @ d[t - 1] + eps[t]
    x, d, exo_raw, eps = x[spec.burn_in:], d[spec.burn_in:], exo_raw[spec.burn_in:], eps[spec.burn_in:]
    nu = eps @ G.T
    sigma_nu = G @ omega @ G.T

    truth = {}
    months = spec.months
    for c in spec.countries:
        sl = parts[c.country]
        b = blocks[c.country]
        resid = nu[1:, sl]
        truth[c.country] = VarxEstimate(
            country=c.country,
            a0=a0[sl],
            a1=a1[sl],
            Phi=b["Phi"],
            Lambda0=b["Lambda0"],
            Lambda1=b["Lambda1"],
            Psi0=Psi0[sl],
            Psi1=Psi1[sl],
            residuals=resid,
            sigma_nu_i=sigma_nu[sl, sl],
            row_labels=tuple(c.domestic_keys),
            target_months=months[1:],
        )
    try:
        model = reduce(assemble(truth, lms, order, spec.exo_order), meta={"sample_start": str(months[0])})
    except SingularG as exc:
        raise UnstableSpec(str(exc)) from exc
    model = replace(model, sigma_nu=sigma_nu)

    transforms = {}
    for key in list(order) + list(spec.exo_order):
        transforms[key] = TransformSpec(TRANSFORMS.get(key.variable, "level"), key)
    endo_raw = np.column_stack([inverse_transform_values(x[:, j], transforms[key].kind) for j, key in enumerate(order)])
    panel = ObservationPanel(
        time_index=months,
        endogenous=x,
        exogenous=d,
        endo_order=order,
        exo_order=spec.exo_order,
        transforms=tuple(transforms.values()),
        exogenous_raw=exo_raw,
        endogenous_raw=endo_raw,
    )

    all_keys = list(order) + list(spec.exo_order)
    all_raw = np.column_stack([endo_raw, exo_raw])
    if frequency == "monthly":
        raw_series = tuple(
            RawSeries(key, months.astype("datetime64[D]"), all_raw[:, j], UNITS.get(key.variable, ""))
            for j, key in enumerate(all_keys)
        )
    elif frequency == "daily":
        children = s_expand.spawn(len(all_keys))
        raw_series = tuple(
            _expand(np.random.default_rng(children[j]), key, months, all_raw[:, j], transforms[key].kind, spec)
            for j, key in enumerate(all_keys)
        )
    else:
        raise ValueError(f"frequency must be 'daily' or 'monthly', got {frequency!r}")

    return SynthData(
        spec=spec,
        exposure=exposure,
        link_matrices=lms,
        truth=truth,
        model=model,
        panel=panel,
        raw_series=raw_series,
        transforms=transforms,
    )


def write_dataset(data: SynthData, directory) -> list[Path]:
    """Write one ``date,value`` CSV per series plus ``exposure.csv``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for series in data.raw_series:
        path = directory / series_filename(series.key)
        write_series_csv(path, series)
        written.append(path)
    path = directory / "exposure.csv"
    write_exposure_csv(path, data.exposure)
    written.append(path)
    return written
