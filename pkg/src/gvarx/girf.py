"""Generalized impulse responses to one-standard-error endogenous shocks.

The closed form propagates ``G^-1 Sigma s_j / sigma_j`` through F. The Monte
Carlo route evaluates the defining difference of conditional expectations by
simulation and serves as an independent check.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DegenerateShock, NotPSD, UnknownKey
from .global_model import GlobalModel
from .timeseries import SeriesKey, format_number

DEFAULT_HORIZON = 24
SIGMA_MODES = ("structural", "reduced")
_MC_CHUNK = 8192


@dataclass(frozen=True)
class ResponsePath:
    horizons: np.ndarray
    values: np.ndarray
    shocked: SeriesKey | str
    labels: tuple[SeriesKey, ...]
    shock_size: float = float("nan")

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("response values must be finite")

    def column(self, key: SeriesKey) -> np.ndarray:
        return self.values[:, self.labels.index(key)]


def shock_covariance(m: GlobalModel, sigma_mode: str = "structural") -> np.ndarray:
    """Covariance entering the GIRF: cov(nu) or cov(G^-1 nu)."""
    if sigma_mode == "structural":
        return m.sigma_nu
    if sigma_mode == "reduced":
        return m.sigma_eps
    raise ValueError(f"sigma_mode must be one of {SIGMA_MODES}, got {sigma_mode!r}")


def _resolve(m: GlobalModel, j) -> int:
    if isinstance(j, SeriesKey):
        try:
            return m.index(j)
        except ValueError:
            raise UnknownKey(f"unknown endogenous variable {j}") from None
    j = int(j)
    if not 0 <= j < m.k:
        raise UnknownKey(f"variable index {j} out of range 0..{m.k - 1}")
    return j


def girf_closed_form(m: GlobalModel, j, H: int = DEFAULT_HORIZON, sigma_mode: str = "structural") -> ResponsePath:
    j = _resolve(m, j)
    if H < 0:
        raise ValueError("horizon must be nonnegative")
    sigma = shock_covariance(m, sigma_mode)
    var_j = sigma[j, j]
    if not var_j > 0:
        raise DegenerateShock(j)
    sd_j = float(np.sqrt(var_j))

    out = np.empty((H + 1, m.k))
    out[0] = m.G_inv @ sigma[:, j] / sd_j
    for h in range(1, H + 1):
        out[h] = m.F @ out[h - 1]
    return ResponsePath(np.arange(H + 1), out, m.global_order[j], m.global_order, sd_j)


def _conditional_factor(sigma: np.ndarray, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Loadings ``(l, B)`` such that nu = l z_0 + B z_rest with z standard normal.

    Taken from a Cholesky factor of Sigma with variable j pivoted to the front,
    so nu_j = sigma_j z_0 and B carries the conditional covariance of the other
    components. Singular covariances fall back to an eigendecomposition of the
    Schur complement.
    """
    k = sigma.shape[0]
    perm = [j] + [i for i in range(k) if i != j]
    inv = np.argsort(perm)
    try:
        C = np.linalg.cholesky(sigma[np.ix_(perm, perm)])
        C = C[inv]
        return C[:, 0].copy(), C[:, 1:].copy()
    except np.linalg.LinAlgError:
        pass
    l = sigma[:, j] / np.sqrt(sigma[j, j])
    rest = perm[1:]
    schur = sigma[np.ix_(rest, rest)] - np.outer(l[rest], l[rest])
    w, V = np.linalg.eigh(0.5 * (schur + schur.T))
    w[w < 1e-12 * max(w.max(initial=0.0), sigma[j, j])] = 0.0
    B = np.zeros((k, k - 1))
    B[rest] = V * np.sqrt(w)
    return l, B


def girf_monte_carlo(
    m: GlobalModel,
    j,
    H: int = DEFAULT_HORIZON,
    draws: int = 100_000,
    seed: int = 0,
    sigma_mode: str = "structural",
    antithetic: bool = False,
) -> ResponsePath:
    """Simulated E[x_{t+h} | shock_j = sigma_j, I] - E[x_{t+h} | I].

    Both expectations are averaged over the same draws (common random
    numbers). Future shocks and the conditioning state are shared by the two
    paths and cancel, so only horizon-0 shocks are simulated. Draws are split
    into fixed-size chunks, each with its own spawned seed; with
    ``antithetic`` each chunk's draws come in +/- pairs.
    """
    j = _resolve(m, j)
    if draws < 1:
        raise ValueError("draws must be at least 1")
    sigma = shock_covariance(m, sigma_mode)
    eig = np.linalg.eigvalsh(0.5 * (sigma + sigma.T))
    if eig.size and eig[0] < -1e-10 * max(abs(eig[-1]), 1.0):
        raise NotPSD(f"shock covariance has eigenvalue {eig[0]:.3e}")
    if not sigma[j, j] > 0:
        raise DegenerateShock(j)
    sd_j = float(np.sqrt(sigma[j, j]))
    l, B = _conditional_factor(sigma, j)

    n_chunks = -(-draws // _MC_CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    shocked_sum = np.zeros((H + 1, m.k))
    base_sum = np.zeros((H + 1, m.k))
    for c, child in enumerate(children):
        n = min(_MC_CHUNK, draws - c * _MC_CHUNK)
        rng = np.random.default_rng(child)
        if antithetic:
            half = rng.standard_normal(((n + 1) // 2, m.k))
            z = np.concatenate([half, -half])[:n]
        else:
            z = rng.standard_normal((n, m.k))
        rest = z[:, 1:] @ B.T
        nu_base = np.outer(z[:, 0], l) + rest
        nu_shock = l + rest  # z_0 pinned at 1, i.e. nu_j = sigma_j
        xs = nu_shock @ m.G_inv.T
        xb = nu_base @ m.G_inv.T
        for h in range(H + 1):
            if h:
                xs = xs @ m.F.T
                xb = xb @ m.F.T
            shocked_sum[h] += xs.sum(axis=0)
            base_sum[h] += xb.sum(axis=0)
    values = (shocked_sum - base_sum) / draws
    return ResponsePath(np.arange(H + 1), values, m.global_order[j], m.global_order, sd_j)


def girf_batch(
    m: GlobalModel,
    shocked: Iterable[SeriesKey],
    H: int = DEFAULT_HORIZON,
    sigma_mode: str = "structural",
) -> dict[SeriesKey, ResponsePath]:
    out: dict[SeriesKey, ResponsePath] = {}
    for key in shocked:
        if key not in out:
            out[key] = girf_closed_form(m, key, H, sigma_mode)
    return out


# -- output ------------------------------------------------------------------

def write_response_csv(path, path_obj: ResponsePath, horizon_offset: int = 1) -> None:
    """One row per horizon, one column per variable; horizons labeled from 1."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["horizon"] + [str(k) for k in path_obj.labels])
        for h, row in zip(path_obj.horizons, path_obj.values):
            writer.writerow([int(h) + horizon_offset] + [format_number(v) for v in row])


def response_to_dict(path_obj: ResponsePath, horizon_offset: int = 1) -> dict:
    return {
        "shocked": str(path_obj.shocked),
        "shock_size": path_obj.shock_size,
        "horizons": [int(h) + horizon_offset for h in path_obj.horizons],
        "labels": [str(k) for k in path_obj.labels],
        "values": path_obj.values.tolist(),
    }


def write_response_json(path, path_obj: ResponsePath, horizon_offset: int = 1) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(response_to_dict(path_obj, horizon_offset), indent=1) + "\n", encoding="utf-8")
