import numpy as np
import pytest

from dampwave.coefficients import build_profile
from dampwave.radial import SectorGrid
from dampwave.resolvent import Derivative, DerivativeDifference
from dampwave.scaling import (CONSISTENT, INCONCLUSIVE, VIOLATION, Sample, ScanSpec, TruncationPolicy,
                              dense_sobolev_norm, difference_exponent, growth_factor, make_report,
                              refinement_study, resolvent_exponent, scan_resolvent, scan_theta,
                              scan_weight, theta_window, weight_operator)

SLOPE_TOL = 0.15
ORACLE_TOL = 1e-3

MIX = build_profile(3, 1.0, g_amp=0.3, w_amp=0.2, a_amp=0.3)
RHO1 = 0.5
SHORT = tuple(np.geomspace(1e-3, 0.1, 5))


def test_exponents():
    assert resolvent_exponent(3, 0) == 0
    assert resolvent_exponent(3, 3) == -2
    assert resolvent_exponent(4, 2) == 0
    assert difference_exponent(3, 3, 0.5) == pytest.approx(-1.5)
    assert difference_exponent(4, 1, 0.5) == 0
    assert theta_window(3, 2, 0.5) == (0.0, 2.5)
    assert theta_window(3, 0, 0.5) == (-1.0, 1.5)


def test_growth_factor():
    assert growth_factor([1, 2, 4]) == 1.0
    assert growth_factor([4, 2, 1]) == 4.0
    assert growth_factor([1, 3, 2, 6]) == 1.5


def test_verdict_semantics():
    r = np.geomspace(1e-3, 0.1, 8)
    mk = lambda p: [Sample(x, x**p, 0) for x in r]
    assert make_report("a", mk(-1.0), -1.0).verdict == CONSISTENT
    assert make_report("b", mk(0.5), -1.0).verdict == CONSISTENT
    assert make_report("c", mk(-1.3), -1.0).verdict == VIOLATION
    noisy = [Sample(x, x**-1.0 * (5 if i % 2 else 1), 0) for i, x in enumerate(r)]
    assert make_report("d", noisy, -1.0, tol=5.0).verdict == INCONCLUSIVE
    failed = mk(0.0)[:5] + [Sample(x, np.nan, -1, False) for x in r[5:]]
    assert make_report("e", failed, 0.0).verdict == INCONCLUSIVE


def test_scan_spec_validation():
    with pytest.raises(ValueError):
        ScanSpec(Derivative(0), r_samples=(0.1, 0.01))
    with pytest.raises(ValueError):
        ScanSpec(Derivative(0), angle=0.0)
    with pytest.raises(ValueError):
        ScanSpec(Derivative(0), r_samples=(0.1, 2.0))


def test_truncation_policy():
    pol = TruncationPolicy()
    assert pol.grid(3, 0.1j).r_max == pytest.approx(120.0)
    g = pol.grid(3, 0.001j)
    assert g.r_max == pytest.approx(1.2e4) and g.h == pytest.approx(0.1, rel=1e-3)
    assert pol.doubled().grid(3, 0.001j).r_max == pytest.approx(2.4e4)
    fixed = TruncationPolicy.fixed(100.0, 999)
    assert fixed.grid(3, 0.5j).n == 999


def test_weight_s_zero():
    g = SectorGrid(3, 0, 100.0, 1000)
    rep = scan_weight(g, 0.0, 1.0, r_samples=SHORT)
    np.testing.assert_allclose(rep.norms, (1 + g.r[0] ** 2) ** -0.5, rtol=1e-2)
    assert abs(rep.slope) < 0.01


def test_weight_slope_and_svd_oracle():
    g = SectorGrid(3, 0, 200.0, 1024)
    rep = scan_weight(g, 1.0, 1.5)
    assert rep.verdict == CONSISTENT
    assert rep.slope == pytest.approx(1.0, abs=SLOPE_TOL)
    for r in (0.01, 0.1):
        S, fwd, _ = weight_operator(g, r, 1.0, 1.5)
        T = np.column_stack([fwd(e) for e in np.eye(g.n)])
        dense = dense_sobolev_norm(S, 0.0, 0.0, T)
        got = rep.norms[np.argmin(np.abs(rep.radii - r))] if np.any(np.isclose(rep.radii, r)) else None
        if got is None:
            got = scan_weight(g, 1.0, 1.5, r_samples=(r, r * 1.01, r * 1.02)).norms[0]
        assert got == pytest.approx(dense, rel=ORACLE_TOL)


def test_weight_below_hypothesis_is_inconclusive():
    g = SectorGrid(3, 0, 200.0, 1024)
    rep = scan_weight(g, 1.0, 0.5)
    assert rep.slope < 1.0 - 0.1
    assert rep.verdict == INCONCLUSIVE
    with pytest.raises(ValueError):
        scan_weight(g, 1.5, 2.0)


def test_theta_free_is_zero():
    g = SectorGrid(3, 0, 100.0, 512)
    rep = scan_theta(build_profile(3), g, 0, 0.5, r_samples=SHORT)
    assert np.all(rep.norms == 0)
    assert rep.verdict == CONSISTENT


@pytest.mark.parametrize("sigma", [1, 2])
def test_theta_slopes(sigma):
    g = SectorGrid(3, 0, 200.0, 1024)
    rep = scan_theta(MIX, g, sigma, 0.5)
    assert rep.slope >= sigma + 0.5 - SLOPE_TOL
    with pytest.raises(ValueError):
        scan_theta(MIX, g, sigma, 0.5, s=5.0)


def test_free_resolvent_bounded():
    scan = ScanSpec(Derivative(0, free=True), np.pi / 2, SHORT, 1.6, 1.6, 0.0)
    rep = scan_resolvent(build_profile(3), scan)
    assert rep.verdict == CONSISTENT and rep.slope >= -0.1
    assert rep.bounded


def test_third_derivative_difference():
    scan = ScanSpec(DerivativeDifference(3), np.pi / 2, SHORT, 5.0, 5.0, difference_exponent(3, 3, RHO1))
    rep = scan_resolvent(MIX, scan)
    assert rep.slope >= RHO1 - 2 - SLOPE_TOL
    assert rep.verdict == CONSISTENT


def test_monotone_in_n_from_first_derivative():
    r = (0.003, 0.03)
    norms = [scan_resolvent(MIX, ScanSpec(Derivative(n), np.pi / 2, r, 5.0, 5.0)).norms for n in range(1, 5)]
    for a, b in zip(norms, norms[1:]):
        assert np.all(b >= a)


def test_first_derivative_smaller_than_resolvent_d4():
    # on the imaginary axis R'(ir) carries a factor |z|, so n = 0 -> 1 is not monotone
    p = build_profile(4, 1.0, g_amp=0.3, w_amp=0.2, a_amp=0.3)
    r = (0.003, 0.03)
    n0 = scan_resolvent(p, ScanSpec(Derivative(0), np.pi / 2, r, 3.6, 3.6)).norms
    n1 = scan_resolvent(p, ScanSpec(Derivative(1), np.pi / 2, r, 3.6, 3.6)).norms
    assert np.all(n1 < n0)


def test_refinement_invariance():
    scan = ScanSpec(Derivative(2), np.pi / 2, (0.01, 0.1), 4.6, 4.6)
    changes = refinement_study(MIX, scan)
    assert max(changes.values()) < 0.05


def test_ell_argmax_is_zero():
    scan = ScanSpec(Derivative(1), np.pi / 2, (0.005, 0.02), 3.6, 3.6, ell_max=2)
    rep = scan_resolvent(MIX, scan)
    assert [s.ell_argmax for s in rep.samples] == [0, 0]


def test_rows_contract():
    scan = ScanSpec(Derivative(0), np.pi / 2, SHORT, 2.6, 2.6)
    rep = scan_resolvent(MIX, scan)
    rows = list(rep.rows("abc"))
    assert len(rows) == len(SHORT)
    assert list(rows[0]) == ["experiment_id", "r", "ell_argmax", "norm", "predicted_exponent",
                             "fitted_slope", "verdict"]
