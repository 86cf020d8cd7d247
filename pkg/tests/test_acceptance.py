"""Acceptance criteria 1-9.

Each test records ``(passed, detail)`` in ``RESULTS``; ``conftest.py``
prints one line per criterion at the end of the session.  Tolerances are
the acceptance tolerances, not loosened to make a criterion pass.
"""

import time

import numpy as np
from dampwave.coefficients import build_profile
from dampwave.evolution import fourier_synthesis_crosscheck, evolve, profile_comparison
from dampwave.freewave import huygens_residual, local_decay_series, poly_bump
from dampwave.mourre import commutator_refinement, eta_scan, hypothesis_report, mourre_grid
from dampwave.norms import fit_loglog
from dampwave.radial import SectorGrid
from dampwave.resolvent import (ResolventEngine, adjoint_law_residual, derivative_terms,
                                finite_difference_derivative, identity_residuals)
from dampwave.scaling import TruncationPolicy, scan_resolvent, scan_theta, scan_weight, theorem_scans

RESULTS: dict = {}

ID_TOL = 1e-8
ADJ_TOL = 1e-12
FD_TOL = 1e-6
SLOPE_TOL = 0.15
BOUNDED_FACTOR = 3.0
WEIGHT_BAND = (0.1, 0.3)
HUYGENS_TOL = 1e-3
HUYGENS_RATIO = 3.0
DECAY_TOL = 0.3
RATIO_TOL = 0.3
DT_SLOPE_TOL = 0.05
MARGIN_TOL = 0.05
SYNTH_TOL = 0.02

MIX3 = build_profile(3, 1.0, g_amp=0.3, w_amp=0.2, a_amp=0.3)
MIX4 = build_profile(4, 1.0, g_amp=0.3, w_amp=0.2, a_amp=0.3)
SMALL3 = build_profile(3, 1.0, g_amp=0.1, w_amp=0.1, a_amp=0.1)
FREE3 = build_profile(3)
Z_SAMPLES = (0.3 + 0.2j, 0.05 + 0.1j, -0.2 + 0.4j, 0.7 + 0.05j)
EXPANSIONS = ((0, ()), (1, (0,)), (1, (1,)), (2, (0, 0)), (2, (0, 1)), (2, (1, 0)), (2, (1, 1)))


def record(k, passed, detail, started):
    RESULTS[k] = (bool(passed), f"{detail} [{time.perf_counter() - started:.0f} s]")
    print(f"criterion {k}: {'PASS' if passed else 'FAIL'}  {RESULTS[k][1]}")
    assert passed, detail


def test_criterion_1_identities():
    t0 = time.perf_counter()
    worst_id, worst_adj = 0.0, 0.0
    for p in (MIX3, MIX4):
        eng = ResolventEngine(p, SectorGrid(p.d, 0, 40.0, 1024))
        small = ResolventEngine(p, SectorGrid(p.d, 0, 25.6, 256))
        for z in Z_SAMPLES:
            res = identity_residuals(eng, z, expansions=EXPANSIONS, depths=(0, 1, 2, 3))
            worst_id = max(worst_id, max(res.values()))
            worst_adj = max(worst_adj, adjoint_law_residual(small, z))
    ok = worst_id <= ID_TOL and worst_adj <= ADJ_TOL
    record(1, ok, f"max identity residual {worst_id:.1e} (tol {ID_TOL:g}), adjoint law {worst_adj:.1e} "
                  f"(tol {ADJ_TOL:g})", t0)


def test_criterion_2_derivative_oracle():
    t0 = time.perf_counter()
    worst = 0.0
    for p in (MIX3, MIX4):
        eng = ResolventEngine(p, SectorGrid(p.d, 0, 40.0, 1024))
        f = np.random.default_rng(2).standard_normal(eng.grid.n)
        for z in Z_SAMPLES:
            for n in range(5):
                ref = finite_difference_derivative(eng, z, f, n)
                val = eng.apply_terms(derivative_terms(n), z, f)
                worst = max(worst, eng.grid.norm(val - ref) / eng.grid.norm(ref))
    record(2, worst <= FD_TOL, f"max relative gap {worst:.1e} (tol {FD_TOL:g})", t0)


def _scan_ok(rep) -> tuple:
    # make_report fits the samples with r <= 0.1; the samples start at 1e-3
    if not np.isfinite(rep.slope):
        return False, "no fit"
    ok = rep.slope >= rep.predicted_exponent - SLOPE_TOL
    if rep.predicted_exponent == 0:
        ok = ok and rep.growth < BOUNDED_FACTOR
    return ok, f"slope {rep.slope:.2f} vs {rep.predicted_exponent:g}, growth {rep.growth:.2f}"


def test_criterion_3_resolvent_scalings():
    t0 = time.perf_counter()
    failures, count = [], 0
    for p in (MIX3, MIX4):
        for scan in theorem_scans(p.d, p.rho0 / 2, range(p.d + 2)):
            rep = scan_resolvent(p, scan, TruncationPolicy())
            ok, info = _scan_ok(rep)
            count += 1
            if not ok:
                failures.append(f"{scan.label}: {info}")
    detail = f"{count - len(failures)}/{count} scans pass"
    if failures:
        detail += "; failing: " + "; ".join(failures)
    record(3, not failures, detail, t0)


def test_criterion_4_weight_and_theta():
    t0 = time.perf_counter()
    g = SectorGrid(3, 0, 200.0, 1024)
    notes, ok = [], True
    for s in (0.5, 1.0):
        rep = scan_weight(g, s, s + 0.5)
        good = s - WEIGHT_BAND[0] <= rep.slope <= s + WEIGHT_BAND[1]
        ok &= good
        notes.append(f"weight s={s:g}: {rep.slope:.3f}")
    rho = MIX3.rho0 / 2
    for sigma in (0, 1, 2):
        rep = scan_theta(MIX3, g, sigma, rho)
        ok &= rep.slope >= sigma + rho - SLOPE_TOL
        notes.append(f"theta{sigma}: {rep.slope:.3f} (>= {sigma + rho - SLOPE_TOL:g})")
    record(4, ok, "; ".join(notes), t0)


def test_criterion_5_huygens():
    t0 = time.perf_counter()
    res = []
    for n in (4096, 8192):
        g = SectorGrid(3, 0, 10.0, n)
        res.append(huygens_residual(g, poly_bump(g.r, 1.0, 3), None, 3.0, 1.0))
    ratio = res[0] / res[1]
    ok = res[1] <= HUYGENS_TOL and ratio >= HUYGENS_RATIO
    record(5, ok, f"residual {res[1]:.2e} at n=8192, ratio {ratio:.1f} per doubling", t0)


def test_criterion_6_even_d_free_decay():
    t0 = time.perf_counter()
    g = SectorGrid(4, 0, 80.0, 4000)
    f = poly_bump(g.r, 1.0, 6)
    ts = np.linspace(10, 60, 11)
    s = local_decay_series(g, f, f, ts, 1.0)
    cos_slope = fit_loglog(ts, s["cos"]).slope
    sin_slope = fit_loglog(ts, s["sin"]).slope
    ok = cos_slope <= -4 + DECAY_TOL and sin_slope <= -3 + DECAY_TOL
    record(6, ok, f"cos slope {cos_slope:.2f} (<= -3.7), sin slope {sin_slope:.2f} (<= -2.7)", t0)


def _compare(profile, grid, f, g, dt):
    t = np.linspace(0, 60, 121)
    a = profile_comparison(profile, grid, f, g, t_grid=t, dt=dt)
    b = profile_comparison(profile, grid, f, g, t_grid=t, dt=a.extra["dt"] / 2, check_dt=False)
    return a, b


def test_criterion_7_profile_comparison():
    t0 = time.perf_counter()
    notes, ok = [], True
    g3 = SectorGrid(3, 0, 100.0, 2000)
    cases = [("d=3 damped", MIX3, g3, poly_bump(g3.r, 1.0, 6), poly_bump(g3.r, 0.8, 6), 0.01)]
    g4 = SectorGrid(4, 0, 100.0, 16383)
    small4 = build_profile(4, 1.0, g_amp=0.1)
    cases.append(("d=4 small metric", small4, g4, poly_bump(g4.r, 1.0, 6), None, 0.005))
    for name, p, grid, f, g, dt in cases:
        a, b = _compare(p, grid, f, g, dt)
        rho1 = a.extra["rho1"]
        change = abs(a.slopes["ratio"] - b.slopes["ratio"])
        good = a.ratio_monotone and a.slopes["ratio"] <= -rho1 + RATIO_TOL and change < DT_SLOPE_TOL
        ok &= good
        ups = int(np.sum(np.diff(a.series["ratio"][a.window_mask()]) >= 0))
        notes.append(f"{name}: ratio {'decreasing' if a.ratio_monotone else f'not monotone ({ups} increases)'}, slope "
                     f"{a.slopes['ratio']:.2f} (<= {-rho1 + RATIO_TOL:g}), dt/2 change {change:.3f}")
    record(7, ok, "; ".join(notes), t0)


def test_criterion_8_mourre():
    t0 = time.perf_counter()
    notes, ok = [], True
    z_ref = 0.1 * np.exp(1j * np.pi / 4)
    for name, p in (("free", FREE3), ("small", SMALL3)):
        _, order = commutator_refinement(p, z_ref)
        ok &= order >= 1
        notes.append(f"{name} refinement order {order:.2f}")
    margins = []
    for name, p in (("free", FREE3), ("small", SMALL3)):
        for r in (0.05, 0.1, 0.2):
            z = r * np.exp(1j * np.pi / 4)
            grid = mourre_grid(p, z)
            best, _ = eta_scan(p, grid, z)
            margins.append(best.relative_margin)
            rep = hypothesis_report(p, grid, z)
            for item in ("H2", "H3a", "H4"):
                if rep[item].status != "PASS":
                    ok = False
                    notes.append(f"{name} r={r:g} {item} {rep[item].status}")
    ok &= min(margins) >= -MARGIN_TOL
    notes.append(f"pi/4 margins/|z|^2 in [{min(margins):.3f}, {max(margins):.3f}] (>= {-MARGIN_TOL:g})")
    # informational: a ray with 2 Re z^2 >= |z|^2
    z = 0.1 * np.exp(1j * np.pi / 12)
    best, _ = eta_scan(SMALL3, mourre_grid(SMALL3, z), z)
    notes.append(f"pi/12 ray margin/|z|^2 {best.relative_margin:.2f}")
    record(8, ok, "; ".join(notes), t0)


def test_criterion_9_synthesis():
    t0 = time.perf_counter()
    grid = SectorGrid(3, 0, 40.0, 800)
    f, g = poly_bump(grid.r, 1.0, 6), poly_bump(grid.r, 0.8, 6)
    worst_dev, worst_spread, ok = 0.0, 0.0, True
    for t in (2.0, 5.0, 10.0):
        ref = evolve(MIX3, grid, f, g, [t])[-1].u
        checks = [fourier_synthesis_crosscheck(MIX3, grid, f, g, mu, t, reference=ref) for mu in (0.25, 0.5)]
        worst_dev = max([worst_dev] + [c.deviation for c in checks])
        spread = grid.norm(checks[0].u - checks[1].u) / grid.norm(checks[1].u)
        worst_spread = max(worst_spread, spread)
        ok &= all(c.verdict == "CONSISTENT" for c in checks)
    ok &= worst_dev <= SYNTH_TOL and worst_spread <= SYNTH_TOL
    record(9, ok, f"max deviation {worst_dev:.1e}, mu spread {worst_spread:.1e} (tol {SYNTH_TOL:g})", t0)
