import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dampwave.coefficients import (Bump, NotInSymbolClass, ProfileError, build_profile,
                                   japanese, seminorm)

TOL = 1e-12
FD_TOL = 1e-8


def test_free_profile():
    p = build_profile(3, 1.0)
    r = np.linspace(0, 50, 101)
    np.testing.assert_array_equal(p.g(r), 1.0)
    np.testing.assert_array_equal(p.w(r), 1.0)
    np.testing.assert_array_equal(p.a(r), 0.0)
    assert p.is_free


def test_metric_evaluator():
    p = build_profile(3, 1.0, g_amp=0.3)
    assert p.g(0.0) == pytest.approx(1.3, abs=TOL)
    r = np.array([1.0, 10.0, 1e4])
    np.testing.assert_allclose(p.g(r), 1 + 0.3 / np.sqrt(1 + r**2), rtol=TOL)
    assert p.g(1e8) == pytest.approx(1.0, abs=1e-8)


def test_damping_bound_read_off_grid():
    p = build_profile(4, 0.5, a_amp=0.2)
    r = p.sample_radii()
    np.testing.assert_allclose(p.a(r), 0.2 * japanese(r) ** -1.5, rtol=TOL)
    # grid sup oracle for <r>^{1+rho0} |a|
    assert p.decay_constants()["short_range"] == pytest.approx(0.2, rel=1e-12)


@pytest.mark.parametrize("kw", [dict(d=2), dict(d=3, rho0=0.0), dict(d=3, rho0=1.5),
                                dict(d=3, g_amp=0.6), dict(d=3, a_amp=-0.1),
                                dict(d=3, bumps=[dict(component="w", center=2.0, width=0.5, height=-1.0)]),
                                dict(d=3, bumps=[dict(component="a", center=2.0, width=0.5, height=-0.1)])])
def test_rejects_invalid(kw):
    with pytest.raises(ProfileError):
        build_profile(**kw)


@pytest.mark.parametrize("name", ["g", "w", "a"])
def test_closed_form_derivatives(name):
    p = build_profile(3, 0.7, g_amp=0.3, w_amp=-0.2, a_amp=0.25,
                      bumps=[Bump(name, 1.5, 0.4, 0.1)])
    f = p.component(name)
    r = np.linspace(0.1, 6.0, 40)
    h = 1e-5
    np.testing.assert_allclose(f(r, 1), (f(r + h) - f(r - h)) / (2 * h), atol=FD_TOL)
    np.testing.assert_allclose(f(r, 2), (f(r + h, 1) - f(r - h, 1)) / (2 * h), atol=FD_TOL)


@pytest.mark.parametrize("name", ["g", "w", "a"])
def test_even_at_origin(name):
    p = build_profile(3, 1.0, g_amp=0.3, w_amp=0.2, a_amp=0.3, bumps=[Bump(name, 1.0, 0.5, 0.2)])
    f = p.component(name)
    h = 1e-4
    assert abs((f(h) - f(-h)) / (2 * h)) < 1e-8
    assert abs(f(0.0, 1)) < 1e-8


def test_ellipticity_constants():
    p = build_profile(3, 1.0, g_amp=0.4, w_amp=-0.3)
    cg, cw = p.ellipticity_constants()
    assert cg == pytest.approx(1.4, rel=1e-9)
    assert cw == pytest.approx(1 / 0.7, rel=1e-9)
    assert p.propagation_speed() == pytest.approx(max(cg, cw))


def test_seminorm_zero():
    assert seminorm(lambda r: np.zeros_like(r), 1.0).value == 0.0


def test_seminorm_order_zero_power():
    est = seminorm(lambda r: japanese(r) ** -1.0, 1.0, max_order=0)
    assert est.value == pytest.approx(1.0, rel=1e-12)


def test_seminorm_divergent():
    with pytest.raises(NotInSymbolClass):
        seminorm(lambda r: japanese(r) ** -0.5, 1.0)


def test_free_seminorms_vanish():
    p = build_profile(3, 1.0)
    for name in ("g", "w", "a"):
        assert seminorm(p.perturbation(name), 1.0, p.d0).value == 0.0


@pytest.mark.parametrize("d", [3, 4, 5])
def test_hypothesis_seminorms_and_sharpness(d):
    p = build_profile(d, 0.6, g_amp=0.3, w_amp=0.2, a_amp=0.3)
    assert np.isfinite(seminorm(p.perturbation("g"), p.rho0, p.d0).value)
    assert np.isfinite(seminorm(p.perturbation("w"), p.rho0, p.d0).value)
    assert np.isfinite(seminorm(p.a, 1 + p.rho0, p.d0).value)
    with pytest.raises(NotInSymbolClass):
        seminorm(p.a, 1 + p.rho0 + 0.5, p.d0)


def test_seminorm_monotone_in_order():
    p = build_profile(3, 1.0, g_amp=0.3)
    vals = [seminorm(p.perturbation("g"), 1.0, m).value for m in range(4)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.0, 0.5), st.floats(0.1, 1.0))
def test_admissible_family_is_elliptic(ga, wa, aa, rho0):
    p = build_profile(3, rho0, g_amp=ga, w_amp=wa, a_amp=aa)
    r = p.sample_radii()
    cg, cw = p.ellipticity_constants()
    assert np.all(p.g(r) >= 1 / cg - TOL) and np.all(p.g(r) <= cg + TOL)
    assert np.all(p.w(r) >= 1 / cw - TOL) and np.all(p.w(r) <= cw + TOL)
    assert np.all(p.a(r) >= 0)
