from collections import Counter

import numpy as np
import pytest

from dampwave.coefficients import build_profile
from dampwave.norms import dense_weighted_norm, fit_loglog, power_norm
from dampwave.radial import SectorGrid, SobolevScale, weight
from dampwave.resolvent import (Derivative, DerivativeDifference, ResolventEngine, ResolventProduct,
                                adjoint_law_residual, chain, derivative_terms, difference_terms,
                                expand_ir, finite_difference_derivative, identity_residuals,
                                in_region, region, resolvent, weighted_norm)

ID_TOL = 1e-8
ADJ_TOL = 1e-12
FD_TOL = 1e-6
NORM_TOL = 1e-3

MIX = build_profile(3, 1.0, g_amp=0.3, w_amp=0.2, a_amp=0.3)
Z = 0.3 * np.exp(1j * np.pi / 3)


@pytest.fixture(scope="module")
def engine():
    return ResolventEngine(MIX, SectorGrid(3, 0, 60.0, 1024))


def _rand(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def test_region_tags():
    assert region(0.1j) == "D_I"
    z = 0.1 * np.exp(1j * np.pi / 4)
    assert region(z) == "D_I" and in_region(z, "D_R_plus")
    assert region(-0.1 + 0.01j) == "D_R_minus"
    assert region(2.0 * np.exp(0.1j)) == "other"


def test_free_pz_and_eigen_shift():
    g = SectorGrid(3, 0, 20.0, 200)
    E = ResolventEngine(build_profile(3), g)
    u = _rand(g.n)
    np.testing.assert_allclose(E.pz(0.2j + 0.1) @ u, -(E.L0 @ u) - (0.1 + 0.2j) ** 2 * u, rtol=1e-14)
    from dampwave.radial import free_spectrum
    sp = free_spectrum(g)
    e1 = sp.synthesize(np.eye(g.n)[0])
    np.testing.assert_allclose(E.pz(1j, free=True) @ e1, (sp.values[0] + 1) * e1, atol=1e-10)


def test_pz_adjoint_law_entrywise():
    g = SectorGrid(3, 1, 20.0, 100)
    E = ResolventEngine(MIX, g)
    P = E.pz(Z).to_dense()
    Pm = E.pz(-np.conj(Z)).to_dense()
    Padj = (np.conj(P.T) * g.q[None, :]) / g.q[:, None]
    np.testing.assert_allclose(Padj, Pm, atol=1e-13 * np.abs(Pm).max())


def test_rejects_lower_half_plane(engine):
    with pytest.raises(ValueError):
        engine.solve(0.1 - 0.01j, np.ones(engine.grid.n))


def test_solve_round_trip(engine):
    v = _rand(engine.grid.n, 5)
    x = engine.solve(Z, engine.pz(Z) @ v)
    assert engine.grid.norm(x - v) <= 1e-10 * engine.grid.norm(v)


def test_identity_suite(engine):
    res = identity_residuals(engine, Z)
    assert len(res) == 3 + 5 * 4
    for name, val in res.items():
        assert val <= ID_TOL, name


def test_adjoint_law_256():
    E = ResolventEngine(MIX, SectorGrid(3, 0, 25.6, 256))
    assert adjoint_law_residual(E, Z) <= ADJ_TOL


@pytest.mark.parametrize("n", range(5))
def test_derivative_terms_match_finite_differences(engine, n):
    f = np.random.default_rng(1).standard_normal(engine.grid.n)
    ref = finite_difference_derivative(engine, Z, f, n)
    val = engine.apply_terms(derivative_terms(n), Z, f)
    assert engine.grid.norm(val - ref) <= FD_TOL * engine.grid.norm(ref)


def test_derivative_terms_examples():
    assert derivative_terms(0) == Counter({resolvent(): 1})
    assert derivative_terms(1) == Counter({chain((1,)): 1})
    assert derivative_terms(2) == Counter({chain((1, 1)): 2, chain((0,)): 1})
    for n in range(7):
        assert all(p.m == n + 2 and c >= 1 for p, c in derivative_terms(n).items())
    with pytest.raises(ValueError):
        derivative_terms(7)


@pytest.mark.parametrize("n", range(5))
def test_difference_terms_budget_and_values(engine, n):
    terms = difference_terms(n)
    assert all(p.m == n + 2 and p.sigma is not None for p in terms)
    f = _rand(engine.grid.n, 2)
    ref = engine.apply(DerivativeDifference(n), Z, f)
    assert engine.grid.norm(engine.apply_terms(terms, Z, f) - ref) <= ID_TOL * engine.grid.norm(ref)


def test_recursion_matches_terms_for_free(engine):
    f = _rand(engine.grid.n, 3)
    for n in range(4):
        a = engine.apply_terms(derivative_terms(n, free=True), Z, f)
        b = engine.derivative(Z, f, n, free=True)
        assert engine.grid.norm(a - b) <= 1e-12 * engine.grid.norm(b)


def test_m_bounds_for_binary_chains():
    for idx in [(), (0,), (1,), (0, 1), (1, 1, 1), (0, 0, 1, 1)]:
        p = chain(idx)
        assert p.m == 2 * (len(idx) + 1) - sum(idx)
        assert p.m >= len(idx) + 2


def test_expand_ir_examples():
    assert expand_ir(resolvent(), 0) == Counter({ResolventProduct(("ir",)): 1,
                                                  ResolventProduct(("ir", "z"), ("gamma2",)): 1})
    terms = expand_ir(chain((1,)), 0)
    assert set(terms) == {ResolventProduct(("ir", "z"), ("gamma1",)),
                          ResolventProduct(("ir", "z", "z"), ("gamma2", "gamma1"))}
    with pytest.raises(ValueError):
        expand_ir(chain((2,)), 1)


@pytest.mark.parametrize("idx", [(), (1,), (0, 1), (1, 1)])
@pytest.mark.parametrize("N", range(4))
def test_expand_ir_exponent_audit(idx, N):
    p = chain(idx)
    for t in expand_ir(p, N):
        assert t.m == p.m
        if "z" in t.slots:
            # leading block of N + 1 resolvents at ir, then gamma_l, then z-chain
            assert t.slots[: N + 1] == ("ir",) * (N + 1)


def test_adjoint_products(engine):
    f, h = _rand(engine.grid.n, 4), _rand(engine.grid.n, 6)
    g = engine.grid
    for spec in [difference_terms(2), Derivative(3), chain((1, 0)), "theta2"]:
        a = g.inner(engine.apply(spec, Z, f), h)
        b = g.inner(f, engine.apply(spec, Z, h, adjoint=True))
        assert abs(a - b) <= 1e-10 * abs(a)


def test_derivative_adjoint_law(engine):
    h = _rand(engine.grid.n, 7)
    for n in range(4):
        a = engine.derivative(Z, h, n, adjoint=True)
        b = (-1) ** n * engine.derivative(-np.conj(Z), h, n)
        assert engine.grid.norm(a - b) <= 1e-10 * engine.grid.norm(b)


def test_weighted_norm_adjoint_symmetry():
    g = SectorGrid(3, 0, 60.0, 600)
    a = weighted_norm(MIX, g, Derivative(2), 0.2j + 0.1, 1.0, 2.0).value
    b = weighted_norm(MIX, g, Derivative(2), 0.2j - 0.1, 2.0, 1.0).value
    assert a == pytest.approx(b, rel=2e-3)


@pytest.mark.parametrize("sigma", [0, 1])
def test_theta_z_derivative_consistency(engine, sigma):
    f = _rand(engine.grid.n, 8)
    eps = 1e-4
    hi = engine.apply_factor(f"theta{sigma + 1}", Z + eps, f)
    lo = engine.apply_factor(f"theta{sigma + 1}", Z - eps, f)
    fd = (hi - lo) / (2 * eps)
    np.testing.assert_allclose(fd, engine.apply_factor(f"theta{sigma}", Z, f), rtol=1e-7, atol=1e-9)


def test_yukawa_decay():
    g = SectorGrid(3, 0, 40.0, 4000)
    E = ResolventEngine(build_profile(3), g)
    bump = np.exp(-(g.r / 0.2) ** 2)
    u = E.solve(1j, bump).real
    m = (g.r >= 5) & (g.r <= 20)
    slope = np.polyfit(g.r[m], np.log(np.abs(u[m]) * g.r[m]), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.05)


def test_weighted_norm_trivial_cases():
    g = SectorGrid(3, 0, 20.0, 200)
    assert weighted_norm(MIX, g, "identity", 0.1j).value == pytest.approx(1.0, abs=1e-6)
    vals = 1 / np.sqrt(1 + g.r**2)
    assert weighted_norm(MIX, g, vals, 0.1j).value == pytest.approx(vals.max(), rel=1e-2)


def test_free_resolvent_bounded_against_svd():
    # dense SVD oracle on a 512-point grid, exponent 0 for n = 0 in d = 3
    g = SectorGrid(3, 0, 102.6, 512)
    free = build_profile(3)
    vals = []
    for r in (0.01, 0.001):
        est = weighted_norm(free, g, Derivative(0, free=True), 1j * r, 1.0, 1.0).value
        E = ResolventEngine(free, g)
        wt = weight(g, 1.0)
        T = np.column_stack([wt * E.solve(1j * r, wt * e, free=True) for e in np.eye(g.n)])
        assert est == pytest.approx(dense_weighted_norm(T, g.q), rel=NORM_TOL)
        vals.append(est)
    assert vals[0] == pytest.approx(vals[1], rel=0.1)


def test_elliptic_resolvent_scale():
    # ||R(ir)||_{H_r^{-1} -> H_r^1} ~ 1/r^2
    out = []
    for r in (0.01, 0.1):
        g = SectorGrid(3, 0, 1200.0, 3000)
        E = ResolventEngine(MIX, g)
        S = SobolevScale(g, r)
        est = power_norm(lambda v: S.apply(1, E.solve(1j * r, S.apply(1, v))),
                         lambda v: S.apply(1, E.solve(1j * r, S.apply(1, v), adjoint=True)), g.q)
        out.append(est.value * r**2)
    assert 1 / 3 <= out[0] / out[1] <= 3


def test_loglog_slope_of_power():
    x = np.geomspace(1e-3, 0.1, 9)
    fit = fit_loglog(x, 2 * x**1.5)
    assert fit.slope == pytest.approx(1.5, abs=1e-12)
