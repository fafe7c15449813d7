from __future__ import annotations

import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gvarx.errors import OrderMismatch, ResidualLengthMismatch, SingularG
from gvarx.global_model import (
    GlobalModel,
    StackedSystem,
    assemble,
    model_from_dict,
    model_to_dict,
    reduce,
    spectral_radius,
    stability,
)
from gvarx.linkage import CountrySpec, LinkageWeights, build_link_matrix
from gvarx.timeseries import SeriesKey
from gvarx.varx import VarxEstimate


def estimate(country, k, ks, m=0, n=30, rng=None, Lambda0=None, Phi=None):
    rng = rng or np.random.default_rng(0)
    return VarxEstimate(
        country=country,
        a0=rng.normal(size=k),
        a1=rng.normal(size=k) * 1e-3,
        Phi=rng.normal(size=(k, k)) * 0.2 if Phi is None else np.asarray(Phi, dtype=float),
        Lambda0=rng.normal(size=(k, ks)) * 0.2 if Lambda0 is None else np.asarray(Lambda0, dtype=float),
        Lambda1=rng.normal(size=(k, ks)) * 0.1,
        Psi0=rng.normal(size=(k, m)),
        Psi1=rng.normal(size=(k, m)),
        residuals=rng.normal(size=(n, k)),
        sigma_nu_i=np.eye(k),
        row_labels=tuple(SeriesKey(country, f"v{i}") for i in range(k)),
    )


def two_country(rng, L_A=None, L_B=None):
    specs = [CountrySpec("A", ("v0", "v1"), ("v0", "v1")), CountrySpec("B", ("v0", "v1"), ("v0", "v1"))]
    order = tuple(k for s in specs for k in s.domestic_keys)
    w = LinkageWeights(("A", "B"), np.array([[0.0, 1.0], [1.0, 0.0]]))
    lms = {s.country: build_link_matrix(s, w, order) for s in specs}
    ests = {"A": estimate("A", 2, 2, 1, rng=rng, Lambda0=L_A), "B": estimate("B", 2, 2, 1, rng=rng, Lambda0=L_B)}
    return ests, lms, order


def four_country(rng):
    specs = [
        CountrySpec("DE", ("a", "b", "c"), ("a", "b", "c")),
        CountrySpec("FR", ("a", "b", "c"), ("a", "b", "c")),
        CountrySpec("IT", ("a", "b"), ("a", "b", "c")),
        CountrySpec("ES", ("b", "c"), ("a", "b")),
    ]
    order = tuple(k for s in specs for k in s.domestic_keys)
    e = rng.uniform(1, 5, (4, 4))
    np.fill_diagonal(e, 0)
    w = LinkageWeights(("DE", "FR", "IT", "ES"), e / e.sum(axis=1, keepdims=True))
    lms = {s.country: build_link_matrix(s, w, order) for s in specs}
    ests = {}
    for s in specs:
        ests[s.country] = VarxEstimate(
            country=s.country, a0=rng.normal(size=s.k), a1=rng.normal(size=s.k),
            Phi=rng.normal(size=(s.k, s.k)) * 0.2, Lambda0=rng.normal(size=(s.k, s.k_star)) * 0.2,
            Lambda1=rng.normal(size=(s.k, s.k_star)) * 0.1, Psi0=rng.normal(size=(s.k, 2)), Psi1=rng.normal(size=(s.k, 2)),
            residuals=rng.normal(size=(40, s.k)), sigma_nu_i=np.eye(s.k), row_labels=tuple(s.domestic_keys),
        )
    return ests, lms, order


def test_zero_contemporaneous_loadings_give_identity_g():
    rng = np.random.default_rng(1)
    ests, lms, order = two_country(rng, np.zeros((2, 2)), np.zeros((2, 2)))
    s = assemble(ests, lms, order)
    assert np.array_equal(s.G, np.eye(4))
    m = reduce(s)
    direct = np.vstack([np.hstack([ests[c].Phi, ests[c].Lambda1]) @ lms[c].W for c in ("A", "B")])
    assert np.array_equal(m.F, direct)


def test_two_country_g_by_hand():
    rng = np.random.default_rng(2)
    L_A = np.array([[0.1, 0.2], [0.3, 0.4]])
    L_B = np.array([[0.5, 0.6], [0.7, 0.8]])
    ests, lms, order = two_country(rng, L_A, L_B)
    s = assemble(ests, lms, order)
    expect = np.array([
        [1, 0, -0.1, -0.2],
        [0, 1, -0.3, -0.4],
        [-0.5, -0.6, 1, 0],
        [-0.7, -0.8, 0, 1],
    ])
    assert np.array_equal(s.G, expect)
    H_A = np.hstack([ests["A"].Phi, ests["A"].Lambda1]) @ lms["A"].W
    assert np.array_equal(s.H[:2], H_A)


def test_single_country_is_plain_var():
    spec = CountrySpec("A", ("x", "y"), ())
    order = tuple(spec.domestic_keys)
    lm = build_link_matrix(spec, LinkageWeights(("A",), np.zeros((1, 1))), order)
    Phi = np.array([[0.5, 0.1], [0.0, 0.3]])
    e = estimate("A", 2, 0, 0, Phi=Phi)
    e = VarxEstimate(**{**e.__dict__, "row_labels": order})
    m = reduce(assemble([e], [lm], order))
    assert np.array_equal(m.G, np.eye(2)) and np.array_equal(m.F, Phi)
    assert m.spectral_radius == pytest.approx(0.5)


def test_block_rows_ignore_estimate_order():
    rng = np.random.default_rng(4)
    ests, lms, order = four_country(rng)
    s1 = assemble(ests, lms, order)
    shuffled = {c: ests[c] for c in ("ES", "IT", "DE", "FR")}
    s2 = assemble(shuffled, dict(reversed(list(lms.items()))), order)
    assert np.array_equal(s1.G, s2.G) and np.array_equal(s1.H, s2.H)
    assert np.array_equal(s1.sigma_nu, s2.sigma_nu)


def test_g_row_blocks_and_sigma_oracle():
    rng = np.random.default_rng(5)
    ests, lms, order = four_country(rng)
    s = assemble(ests, lms, order)
    r = 0
    for c in ("DE", "FR", "IT", "ES"):
        e = ests[c]
        block = np.hstack([np.eye(e.k), -e.Lambda0]) @ lms[c].W
        assert np.array_equal(s.G[r : r + e.k], block)
        r += e.k
    E = np.hstack([ests[c].residuals for c in ("DE", "FR", "IT", "ES")])
    oracle = np.cov(E, rowvar=False, bias=True) + np.outer(E.mean(0), E.mean(0))
    assert np.max(np.abs(s.sigma_nu - oracle)) <= 1e-12
    assert np.linalg.eigvalsh(s.sigma_nu).min() >= -1e-12


def _system(G, H, rng, m=2):
    k = G.shape[0]
    order = tuple(SeriesKey("X", f"v{i}") for i in range(k))
    return StackedSystem(
        G=G, H=H, a0=rng.normal(size=k), a1=rng.normal(size=k), Psi0=rng.normal(size=(k, m)),
        Psi1=rng.normal(size=(k, m)), sigma_nu=np.eye(k), global_order=order,
    )


def test_identity_and_scalar_g():
    rng = np.random.default_rng(6)
    H = rng.normal(size=(3, 3))
    s = _system(np.eye(3), H, rng)
    m = reduce(s)
    assert np.array_equal(m.F, H) and np.array_equal(m.Gamma0, s.Psi0) and np.array_equal(m.c0, s.a0)
    m2 = reduce(replace(s, G=2 * np.eye(3)))
    assert np.allclose(m2.F, H / 2, rtol=0, atol=1e-15)
    assert np.allclose(m2.c1, s.a1 / 2, rtol=0, atol=1e-15)
    assert np.allclose(m2.Gamma1, s.Psi1 / 2, rtol=0, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_random_well_conditioned_reconstruction(seed):
    rng = np.random.default_rng(seed)
    G = np.eye(6) + 0.2 * rng.normal(size=(6, 6))
    s = _system(G, rng.normal(size=(6, 6)), rng)
    m = reduce(s)
    assert np.max(np.abs(G @ m.F - s.H)) <= 1e-10
    assert np.max(np.abs(G @ m.Gamma0 - s.Psi0)) <= 1e-10
    assert np.max(np.abs(G @ m.Gamma1 - s.Psi1)) <= 1e-10
    assert np.max(np.abs(G @ m.G_inv - np.eye(6))) <= 1e-10


def test_singular_g_guard():
    ests, lms, order = two_country(np.random.default_rng(0), np.eye(2), np.eye(2))
    with pytest.raises(SingularG):
        reduce(assemble(ests, lms, order))


def test_mismatch_errors():
    rng = np.random.default_rng(8)
    ests, lms, order = two_country(rng)
    short = VarxEstimate(**{**ests["B"].__dict__, "residuals": ests["B"].residuals[:-1]})
    with pytest.raises(ResidualLengthMismatch):
        assemble({"A": ests["A"], "B": short}, lms, order)
    with pytest.raises(OrderMismatch):
        assemble({"A": ests["A"]}, lms, order)
    with pytest.raises(OrderMismatch):
        assemble(ests, lms, order[::-1])


@pytest.mark.parametrize("F,radius,stable", [
    (0.5 * np.eye(3), 0.5, True),
    (np.eye(2), 1.0, False),
    (np.array([[1.2, -0.27], [1.0, 0.0]]), 0.9, True),  # eigenvalues 0.9 and 0.3
])
def test_stability_examples(F, radius, stable):
    assert spectral_radius(F) == pytest.approx(radius, abs=1e-12)
    m = GlobalModel(F=F, c0=np.zeros(len(F)), c1=np.zeros(len(F)), Gamma0=np.zeros((len(F), 0)), Gamma1=np.zeros((len(F), 0)),
                    sigma_nu=np.eye(len(F)), G_inv=np.eye(len(F)), global_order=(), spectral_radius=spectral_radius(F))
    assert stability(m) == {"spectral_radius": pytest.approx(radius, abs=1e-12), "stable": stable}


def test_json_roundtrip_exact():
    rng = np.random.default_rng(9)
    ests, lms, order = four_country(rng)
    m = reduce(assemble(ests, lms, order, (SeriesKey("EA", "p"), SeriesKey("EA", "q"))), {"sample_start": "2006-01"})
    back = model_from_dict(json.loads(json.dumps(model_to_dict(m))))
    for name in ("F", "c0", "c1", "Gamma0", "Gamma1", "sigma_nu", "G_inv", "G", "H"):
        assert np.array_equal(getattr(back, name), getattr(m, name)), name
    assert back.global_order == m.global_order and back.exo_order == m.exo_order
    assert back.meta["sample_start"] == "2006-01"
    assert back.sigma_eps.shape == (10, 10)
