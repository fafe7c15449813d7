"""Country VARX*(1,1) models estimated by equation-by-equation least squares.

Design columns are ordered ``[1, t, x_{t-1}, x*_t, x*_{t-1}, d_t, d_{t-1}]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import OrderMismatch, RankDeficient, TooFewObservations
from .linkage import CountrySpec, LinkMatrix, foreign_series
from .timeseries import ObservationPanel, SeriesKey

RANK_TOL = 1e-10


@dataclass(frozen=True)
class RegressorBlock:
    rows: np.ndarray
    column_labels: tuple[str, ...]
    target_months: np.ndarray
    targets: np.ndarray
    target_labels: tuple[SeriesKey, ...]
    k: int
    k_star: int
    m: int

    @property
    def p(self) -> int:
        return self.rows.shape[1]


def regressor_count(k: int, k_star: int, m: int) -> int:
    return 2 + k + 2 * k_star + 2 * m


def build_regressor_matrix(panel: ObservationPanel, spec: CountrySpec, lm: LinkMatrix) -> RegressorBlock:
    if lm.country != spec.country:
        raise OrderMismatch(f"link matrix for {lm.country} used with spec for {spec.country}")
    T = panel.T
    p = regressor_count(spec.k, spec.k_star, panel.m)
    if T < 2 + p:
        raise TooFewObservations(f"{spec.country}: {T} months cannot identify {p} regressors")

    col = {key: j for j, key in enumerate(panel.endo_order)}
    x = panel.endogenous[:, [col[key] for key in spec.domestic_keys]]
    xs = foreign_series(panel, lm)
    d = panel.exogenous

    n = T - 1
    trend = np.arange(1, n + 1, dtype=float)
    X = np.column_stack([np.ones(n), trend, x[:-1], xs[1:], xs[:-1], d[1:], d[:-1]])

    dom = [str(k) for k in spec.domestic_keys]
    fgn = [str(k) for k in spec.foreign_keys]
    exo = [str(k) for k in panel.exo_order]
    labels = (
        ["const", "trend"]
        + [f"{v}(-1)" for v in dom]
        + fgn
        + [f"{v}(-1)" for v in fgn]
        + exo
        + [f"{v}(-1)" for v in exo]
    )
    return RegressorBlock(
        rows=X,
        column_labels=tuple(labels),
        target_months=panel.time_index[1:],
        targets=x[1:],
        target_labels=tuple(spec.domestic_keys),
        k=spec.k,
        k_star=spec.k_star,
        m=panel.m,
    )


@dataclass(frozen=True)
class VarxEstimate:
    country: str
    a0: np.ndarray
    a1: np.ndarray
    Phi: np.ndarray
    Lambda0: np.ndarray
    Lambda1: np.ndarray
    Psi0: np.ndarray
    Psi1: np.ndarray
    residuals: np.ndarray
    sigma_nu_i: np.ndarray
    column_labels: tuple[str, ...] = ()
    row_labels: tuple[SeriesKey, ...] = ()
    target_months: np.ndarray | None = None

    @property
    def k(self) -> int:
        return self.a0.size

    @property
    def coefficients(self) -> np.ndarray:
        """k_i x p matrix with columns in design order."""
        return np.column_stack(
            [self.a0, self.a1, self.Phi, self.Lambda0, self.Lambda1, self.Psi0, self.Psi1]
        )

    def to_dict(self) -> dict:
        return {
            "country": self.country,
            "rows": [str(k) for k in self.row_labels],
            "columns": list(self.column_labels),
            "coefficients": self.coefficients.tolist(),
            "sigma_nu_i": self.sigma_nu_i.tolist(),
            "nobs": int(self.residuals.shape[0]),
            "first_target": str(self.target_months[0]) if self.target_months is not None else None,
            "last_target": str(self.target_months[-1]) if self.target_months is not None else None,
        }


def _least_squares(X: np.ndarray, Y: np.ndarray, labels) -> np.ndarray:
    scale = np.linalg.norm(X, axis=0)
    scale[scale == 0] = 1.0
    Xs = X / scale
    sv = np.linalg.svd(Xs, compute_uv=False)
    if sv[-1] < RANK_TOL * sv[0]:
        # pivoted QR pushes the most dependent columns to the end
        _, R, piv = scipy.linalg.qr(Xs, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        bad = np.flatnonzero(diag < RANK_TOL * diag[0])
        worst = piv[bad[0]] if bad.size else piv[-1]
        raise RankDeficient(labels[worst] if labels else int(worst))
    Q, R = np.linalg.qr(Xs)
    B = scipy.linalg.solve_triangular(R, Q.T @ Y)
    return B / scale[:, None]


def estimate_varx(X: RegressorBlock, Y: np.ndarray | None = None, country: str | None = None) -> VarxEstimate:
    """OLS per equation; residual covariance uses n - p degrees of freedom."""
    Y = X.targets if Y is None else np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, p = X.rows.shape
    if Y.shape[0] != n:
        raise OrderMismatch(f"targets have {Y.shape[0]} rows, design has {n}")
    if Y.shape[1] != X.k:
        raise OrderMismatch(f"targets have {Y.shape[1]} columns, design expects {X.k}")
    if n - p < 1:
        raise TooFewObservations(f"{n} rows cannot identify {p} regressors")
    B = _least_squares(X.rows, Y, X.column_labels)
    resid = Y - X.rows @ B
    sigma = resid.T @ resid / (n - p)
    sigma = 0.5 * (sigma + sigma.T)

    C = B.T
    bounds = np.cumsum([0, 1, 1, X.k, X.k_star, X.k_star, X.m, X.m])
    parts = [C[:, bounds[i]:bounds[i + 1]] for i in range(7)]
    if country is None:
        country = X.target_labels[0].country if X.target_labels else ""
    return VarxEstimate(
        country=country,
        a0=parts[0][:, 0].copy(),
        a1=parts[1][:, 0].copy(),
        Phi=parts[2],
        Lambda0=parts[3],
        Lambda1=parts[4],
        Psi0=parts[5],
        Psi1=parts[6],
        residuals=resid,
        sigma_nu_i=sigma,
        column_labels=X.column_labels,
        row_labels=X.target_labels,
        target_months=X.target_months,
    )

