import numpy as np
import pytest

from dampwave.coefficients import build_profile
from dampwave.mourre import (ETA_MAX, FAIL, PASS, SKIPPED, commutator,
                             commutator_refinement, cutoff, cutoff_eigenpairs, dilate, eta_scan,
                             hypothesis_report, k_bound, k_operator, mourre_grid, mourre_positivity,
                             wall_flux)
from dampwave.freewave import smooth_bump
from dampwave.radial import SectorGrid
from dampwave.scaling import CONSISTENT, INCONCLUSIVE, VIOLATION

RESIDUAL_TOL = 1e-3
VIRIAL_TOL = 1e-3
GROUP_TOL = 1e-3
MARGIN_TOL = 0.05

FREE = build_profile(3)
SMALL = build_profile(3, 1.0, g_amp=0.1, w_amp=0.1, a_amp=0.1)
Z_SMALL_ANGLE = 0.1 * np.exp(1j * np.pi / 12)
Z_DIAGONAL = 0.1 * np.exp(1j * np.pi / 4)


def test_cutoff_shape():
    x = np.linspace(-3, 3, 601)
    c = cutoff(x)
    np.testing.assert_array_equal(c[np.abs(x) <= 1], 1.0)
    np.testing.assert_array_equal(c[np.abs(x) >= 2], 0.0)
    assert np.all((c >= 0) & (c <= 1))
    np.testing.assert_allclose(c, c[::-1])
    assert np.all(np.diff(c[x >= 0]) <= 0)


@pytest.mark.parametrize("profile", [FREE, SMALL])
def test_commutator_identity_refines(profile):
    res, order = commutator_refinement(profile, Z_DIAGONAL)
    assert order >= 1
    assert res[-1] <= RESIDUAL_TOL
    assert np.all(np.diff(res) < 0)


def test_commutator_identity_l2_norm_also_refines():
    res, order = commutator_refinement(SMALL, Z_DIAGONAL, norm="l2")
    assert order >= 1


def test_free_k_vanishes():
    g = SectorGrid(3, 0, 40.0, 400)
    K = k_operator(FREE, g, Z_DIAGONAL)
    assert np.max(np.abs(K.diags)) == 0.0
    assert k_bound(FREE, g, Z_DIAGONAL) == 0.0


def test_k_bound_stable_along_ray():
    vals = []
    for r in (0.02, 0.05, 0.1):
        z = r * np.exp(1j * np.pi / 4)
        g = SectorGrid(3, 0, 40.0 / r, 1999)
        vals.append(k_bound(SMALL, g, z))
    assert max(vals) <= 3 * min(vals)


def test_wall_flux_restores_virial():
    # On a box eigenvector the discrete commutator has zero expectation;
    # the boundary form brings back 2 <P_R v, v>.
    z = 0.1 * np.exp(1j * 0.05)
    g = mourre_grid(FREE, z)
    mu, V, PR = cutoff_eigenpairs(FREE, g, z, ETA_MAX)
    v = V[:, 0]
    raw = g.inner(commutator(PR, v), v).real
    full = raw + wall_flux(FREE, g, V[:, :1])[0, 0]
    pr = g.inner(PR @ v, v).real + (z * z).real  # -Delta part
    assert abs(raw) <= VIRIAL_TOL * pr
    assert full == pytest.approx(2 * pr, rel=VIRIAL_TOL)


@pytest.mark.parametrize("profile", [FREE, SMALL])
def test_positivity_small_angle(profile):
    g = mourre_grid(profile, Z_SMALL_ANGLE)
    best, audits = eta_scan(profile, g, Z_SMALL_ANGLE)
    assert best.status == CONSISTENT
    assert best.relative_margin >= -MARGIN_TOL
    assert best.range_dim > 0


def test_positivity_fails_on_diagonal_ray():
    # Re z^2 = 0 there, so the lower bound 2 Re z^2 >= |z|^2 is lost and
    # the margin sits at -|z|^2/2.
    g = mourre_grid(FREE, Z_DIAGONAL)
    a = mourre_positivity(FREE, g, Z_DIAGONAL)
    assert a.status == VIOLATION
    assert a.relative_margin == pytest.approx(-0.5, abs=0.01)


def test_raw_margin_without_wall_is_negative():
    g = mourre_grid(FREE, Z_SMALL_ANGLE)
    a = mourre_positivity(FREE, g, Z_SMALL_ANGLE, wall=False)
    assert a.positivity_margin < 0
    assert a.extra["wall"] is False


def test_eta_and_region_rejected():
    g = SectorGrid(3, 0, 40.0, 200)
    with pytest.raises(ValueError):
        mourre_positivity(FREE, g, Z_DIAGONAL, eta=1 / 16)
    with pytest.raises(ValueError):
        mourre_positivity(FREE, g, 0.5j)  # in D_I, not in D_R^+
    with pytest.raises(ValueError):
        mourre_positivity(FREE, g, 1.5 + 0.1j)


def test_empty_window_inconclusive():
    g = SectorGrid(3, 0, 10.0, 99)  # lowest eigenvalue far above 2 eta |z|^2
    a = mourre_positivity(FREE, g, Z_SMALL_ANGLE, eta=1 / 128)
    assert a.status == INCONCLUSIVE
    assert a.range_dim == 0


def test_dilation_group_law():
    g = SectorGrid(3, 0, 40.0, 2000)
    u = smooth_bump(g.r, 2.0, 8.0)
    back = dilate(g, dilate(g, u, 0.7), -0.7)
    assert g.norm(back - u) <= GROUP_TOL * g.norm(u)
    # unitary on L2(r^{d-1} dr)
    assert g.norm(dilate(g, u, 0.4)) == pytest.approx(g.norm(u), rel=GROUP_TOL)


@pytest.mark.parametrize("profile", [FREE, SMALL])
def test_hypothesis_report(profile):
    g = mourre_grid(profile, Z_SMALL_ANGLE)
    rep = hypothesis_report(profile, g, Z_SMALL_ANGLE)
    for name in ("H1", "H2", "H3a", "H3b", "H4", "H5"):
        assert rep[name].status == PASS, rep[name]
    assert rep["H3c"].status == SKIPPED
    assert rep["H3a"].value <= 10
    assert rep["H3b"].value == pytest.approx(2.0, rel=0.1)
    assert rep.passed
    assert set(rep.to_dict()) == {"z", "items"}


def test_hypothesis_report_diagonal_fails_h5():
    g = mourre_grid(FREE, Z_DIAGONAL)
    rep = hypothesis_report(FREE, g, Z_DIAGONAL)
    assert rep["H5"].status == FAIL
    assert not rep.passed
