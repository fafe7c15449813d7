"""Stacking country VARX* models into the global system and its reduced form.

Structural form::

    G x_t = a0 + a1 t + H x_{t-1} + Psi0 d_t + Psi1 d_{t-1} + nu_t

Reduced form, obtained by solving against G::

    x_t = c0 + c1 t + F x_{t-1} + Gamma0 d_t + Gamma1 d_{t-1} + eps_t
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .errors import OrderMismatch, ResidualLengthMismatch, SingularG
from .linkage import LinkMatrix
from .timeseries import SeriesKey
from .varx import VarxEstimate

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class StackedSystem:
    G: np.ndarray
    H: np.ndarray
    a0: np.ndarray
    a1: np.ndarray
    Psi0: np.ndarray
    Psi1: np.ndarray
    sigma_nu: np.ndarray
    global_order: tuple[SeriesKey, ...]
    exo_order: tuple[SeriesKey, ...] = ()
    residuals: np.ndarray | None = None


@dataclass(frozen=True)
class GlobalModel:
    F: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    Gamma0: np.ndarray
    Gamma1: np.ndarray
    sigma_nu: np.ndarray
    G_inv: np.ndarray
    global_order: tuple[SeriesKey, ...]
    spectral_radius: float
    exo_order: tuple[SeriesKey, ...] = ()
    G: np.ndarray | None = None
    H: np.ndarray | None = None
    Psi0: np.ndarray | None = None
    Psi1: np.ndarray | None = None
    a0: np.ndarray | None = None
    a1: np.ndarray | None = None
    condition_number: float = float("nan")
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.F.shape[0]

    @property
    def m(self) -> int:
        return self.Gamma0.shape[1]

    @property
    def stable(self) -> bool:
        return self.spectral_radius < 1.0

    @property
    def sigma_eps(self) -> np.ndarray:
        """Covariance of the reduced-form shocks G^-1 nu_t."""
        s = self.G_inv @ self.sigma_nu @ self.G_inv.T
        return 0.5 * (s + s.T)

    def index(self, key: SeriesKey) -> int:
        return self.global_order.index(key)


def _country_order(global_order: Sequence[SeriesKey]) -> list[str]:
    seen: dict[str, None] = {}
    for key in global_order:
        seen.setdefault(key.country)
    return list(seen)


def assemble(
    estimates: Mapping[str, VarxEstimate] | Sequence[VarxEstimate],
    lms: Mapping[str, LinkMatrix] | Sequence[LinkMatrix],
    global_order: Sequence[SeriesKey],
    exo_order: Sequence[SeriesKey] = (),
) -> StackedSystem:
    """Build G, H, Psi and the full residual covariance blockwise.

    Country blocks follow the order in which countries first appear in
    ``global_order``, whatever the order of ``estimates``.
    """
    global_order = tuple(global_order)
    if not isinstance(estimates, Mapping):
        estimates = {e.country: e for e in estimates}
    if not isinstance(lms, Mapping):
        lms = {lm.country: lm for lm in lms}

    countries = _country_order(global_order)
    stacked_labels = []
    for c in countries:
        if c not in estimates or c not in lms:
            raise OrderMismatch(f"no estimate or link matrix for country {c}")
        stacked_labels.extend(estimates[c].row_labels or [SeriesKey(c, str(i)) for i in range(estimates[c].k)])
    if tuple(stacked_labels) != global_order:
        raise OrderMismatch("country variable orders do not concatenate to the global order")

    G_rows, H_rows, resid = [], [], []
    for c in countries:
        e, lm = estimates[c], lms[c]
        if lm.global_order != global_order:
            raise OrderMismatch(f"link matrix of {c} built for a different global order")
        eye = np.eye(e.k)
        G_rows.append(np.hstack([eye, -e.Lambda0]) @ lm.W)
        H_rows.append(np.hstack([e.Phi, e.Lambda1]) @ lm.W)
        resid.append(e.residuals)

    lengths = {r.shape[0] for r in resid}
    if len(lengths) != 1:
        raise ResidualLengthMismatch(f"country residual lengths differ: {sorted(lengths)}")
    E = np.hstack(resid)
    sigma = E.T @ E / E.shape[0]
    sigma = 0.5 * (sigma + sigma.T)

    return StackedSystem(
        G=np.vstack(G_rows),
        H=np.vstack(H_rows),
        a0=np.concatenate([estimates[c].a0 for c in countries]),
        a1=np.concatenate([estimates[c].a1 for c in countries]),
        Psi0=np.vstack([estimates[c].Psi0 for c in countries]),
        Psi1=np.vstack([estimates[c].Psi1 for c in countries]),
        sigma_nu=sigma,
        global_order=global_order,
        exo_order=tuple(exo_order),
        residuals=E,
    )


def reduce(s: StackedSystem, meta: dict | None = None) -> GlobalModel:
    cond = float(np.linalg.cond(s.G))
    if not np.isfinite(cond) or cond >= MAX_CONDITION:
        raise SingularG(cond)
    lu = scipy.linalg.lu_factor(s.G)

    def solve(b):
        return scipy.linalg.lu_solve(lu, b)

    F = solve(s.H)
    return GlobalModel(
        F=F,
        c0=solve(s.a0),
        c1=solve(s.a1),
        Gamma0=solve(s.Psi0),
        Gamma1=solve(s.Psi1),
        sigma_nu=s.sigma_nu,
        G_inv=solve(np.eye(s.G.shape[0])),
        global_order=s.global_order,
        spectral_radius=spectral_radius(F),
        exo_order=s.exo_order,
        G=s.G,
        H=s.H,
        Psi0=s.Psi0,
        Psi1=s.Psi1,
        a0=s.a0,
        a1=s.a1,
        condition_number=cond,
        meta=dict(meta or {}),
    )


def spectral_radius(F: np.ndarray) -> float:
    if F.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(F))))


def stability(m: GlobalModel) -> dict:
    radius = spectral_radius(m.F)
    return {"spectral_radius": radius, "stable": bool(radius < 1.0)}


# -- JSON --------------------------------------------------------------------

_MATRICES = ("F", "c0", "c1", "Gamma0", "Gamma1", "sigma_nu", "G_inv", "G", "H", "Psi0", "Psi1", "a0", "a1")


def model_to_dict(m: GlobalModel) -> dict:
    out = {
        "global_order": [str(k) for k in m.global_order],
        "exo_order": [str(k) for k in m.exo_order],
        "spectral_radius": m.spectral_radius,
        "stable": m.stable,
        "condition_number_G": m.condition_number,
        "meta": m.meta,
        "matrices": {},
    }
    for name in _MATRICES:
        value = getattr(m, name)
        if value is not None:
            out["matrices"][name] = np.asarray(value).tolist()
    return out


def model_from_dict(data: dict) -> GlobalModel:
    mats = data["matrices"]
    k = len(data["global_order"])
    m = len(data["exo_order"])

    def arr(name, shape=None):
        if name not in mats:
            return None
        a = np.array(mats[name], dtype=float)
        return a.reshape(shape) if shape is not None else a

    return GlobalModel(
        F=arr("F", (k, k)),
        c0=arr("c0", (k,)),
        c1=arr("c1", (k,)),
        Gamma0=arr("Gamma0", (k, m)),
        Gamma1=arr("Gamma1", (k, m)),
        sigma_nu=arr("sigma_nu", (k, k)),
        G_inv=arr("G_inv", (k, k)),
        global_order=tuple(SeriesKey.parse(s) for s in data["global_order"]),
        spectral_radius=float(data["spectral_radius"]),
        exo_order=tuple(SeriesKey.parse(s) for s in data["exo_order"]),
        G=arr("G", (k, k)),
        H=arr("H", (k, k)),
        Psi0=arr("Psi0", (k, m)),
        Psi1=arr("Psi1", (k, m)),
        a0=arr("a0", (k,)),
        a1=arr("a1", (k,)),
        condition_number=float(data.get("condition_number_G", float("nan"))),
        meta=dict(data.get("meta", {})),
    )
