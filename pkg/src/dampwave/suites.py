"""Experiment suites: each expands a resolved config into independent items.

An item is a module-level function ``fn(cfg, eid, **kwargs) -> ItemResult``
so that it can run in a worker process.  Items never raise; a failure is
recorded as an ``ERROR`` row and the sibling items still run.
"""

from __future__ import annotations

import logging
import traceback
from dataclasses import dataclass, field, replace

import numpy as np

from .coefficients import NotInSymbolClass, build_profile, seminorm
from .config import angle_value, r_samples
from .evolution import evolve, fourier_synthesis_crosscheck, profile_comparison
from .freewave import huygens_residual, poly_bump
from .mourre import commutator_refinement, eta_scan, hypothesis_report, mourre_grid
from .radial import SectorGrid
from .resolvent import ResolventEngine, adjoint_law_residual, identity_residuals
from .scaling import (CONSISTENT, INCONCLUSIVE, VIOLATION, TruncationPolicy, scan_resolvent, scan_theta,
                      scan_weight, theorem_scans)

logger = logging.getLogger(__name__)

ERROR = "ERROR"
REFINE_SLOPE_TOL = 0.05
SCALING_COLUMNS = ["experiment_id", "r", "ell_argmax", "norm", "predicted_exponent", "fitted_slope", "verdict"]
TIME_COLUMNS = ["experiment_id", "t", "norm_local", "norm_weighted", "norm_diff"]


@dataclass
class ItemResult:
    """Outcome of one suite item.

    ``rows`` are summary rows with keys ``label, predicted, slope, verdict,
    note``; ``tables`` maps a CSV name to ``(columns, rows)``; ``plots``
    maps a CSV name to ``(x column, y columns, log-log)``.
    """

    label: str
    rows: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    plots: dict = field(default_factory=dict)
    detail: dict = field(default_factory=dict)


def summary_row(label, verdict, predicted=float("nan"), slope=float("nan"), note="") -> dict:
    return {"label": label, "predicted": float(predicted), "slope": float(slope), "verdict": verdict,
            "note": note}


def worst(verdicts) -> str:
    verdicts = list(verdicts)
    for v in (VIOLATION, ERROR, INCONCLUSIVE):
        if v in verdicts:
            return v
    return CONSISTENT


def _profile(cfg):
    return build_profile(**cfg["profile"])


def _grid(cfg, n=None, ell=0):
    g = cfg["grid"]
    return SectorGrid(cfg["profile"]["d"], ell, g["r_max"], n or g["n"])


def _slug(text: str) -> str:
    keep = [c if c.isalnum() or c in "-_." else "_" for c in text]
    return "".join(keep).strip("_")


def _scaling_item(label, rep, eid) -> ItemResult:
    name = _slug(label) + ".csv"
    note = f"growth {rep.growth:.3g}" if rep.predicted_exponent == 0 else ""
    return ItemResult(label, [summary_row(label, rep.verdict, rep.predicted_exponent, rep.slope, note)],
                      {name: (SCALING_COLUMNS, list(rep.rows(eid)))}, {name: ("r", ["norm"], True)},
                      {"fit_range": list(rep.fit_range), "growth": rep.growth, "residual": rep.residual,
                       **{k: v for k, v in rep.extra.items() if np.isscalar(v)}})


# ---------------------------------------------------------------------------
# items


def item_coeffs(cfg, eid, component):
    p = _profile(cfg)
    base = {"g": 1.0, "w": 1.0, "a": 0.0}[component]
    kappa = p.rho0 + (1.0 if component == "a" else 0.0)
    fn = getattr(p, component)
    label = f"{component} - {base:g} in S^-{kappa:g}"
    try:
        est = seminorm(lambda r, m=0: fn(r, m) - (base if m == 0 else 0.0), kappa, cfg["params"]["max_order"])
        row = summary_row(label, CONSISTENT, note=f"seminorm {est.value:.4g}")
        detail = {"seminorm": est.value, "per_order": list(est.per_order)}
    except NotInSymbolClass as exc:
        row, detail = summary_row(label, VIOLATION, note=str(exc)), {}
    r = np.linspace(0.0, cfg["grid"]["r_max"], cfg["params"]["sample_count"])
    rows = [{"experiment_id": eid, "r": float(x), "value": float(v), "d1": float(d1), "d2": float(d2)}
            for x, v, d1, d2 in zip(r, fn(r), fn(r, 1), fn(r, 2))]
    name = f"coeff_{component}.csv"
    return ItemResult(label, [row], {name: (["experiment_id", "r", "value", "d1", "d2"], rows)},
                      {name: ("r", ["value"], False)}, detail)


def item_resolvent_scan(cfg, eid, angle, n, kind):
    pr = cfg["params"]
    phi = angle_value(angle)
    scans = theorem_scans(cfg["profile"]["d"], pr["rho1"], [n], phi, pr["delta_offset"], cfg["grid"]["ell_max"],
                          r_samples(pr))
    scan = scans[0 if kind == "resolvent" else 1]
    scan = replace(scan, fit_r_max=pr["fit_r_max"])
    policy = TruncationPolicy(pr["policy_h"], pr["policy_kappa"], pr["policy_r_max_min"], pr["policy_r_max_cap"])
    rep = scan_resolvent(_profile(cfg), scan, policy, seed=cfg["seed"])
    return _scaling_item(scan.label, rep, eid)


def item_weight_scan(cfg, eid, s):
    pr = cfg["params"]
    delta = s + pr["delta_shift"]
    label = f"weight s={s:g} delta={delta:g}"
    rep = scan_weight(_grid(cfg), s, delta, r_samples(pr), pr["fit_r_max"], label)
    return _scaling_item(label, rep, eid)


def item_theta_scan(cfg, eid, sigma):
    pr = cfg["params"]
    rep = scan_theta(_profile(cfg), _grid(cfg), sigma, pr["rho"], None, r_samples(pr), angle_value(pr["angle"]),
                     pr["fit_r_max"])
    return _scaling_item(rep.label, rep, eid)


def item_identity(cfg, eid, z):
    pr = cfg["params"]
    z = complex(*z)
    eng = ResolventEngine(_profile(cfg), _grid(cfg))
    res = identity_residuals(eng, z, seed=cfg["seed"])
    label = f"identities z={z.real:g}{z.imag:+g}i"
    rows = [{"experiment_id": eid, "z_re": z.real, "z_im": z.imag, "identity": k, "residual": float(v)}
            for k, v in res.items()]
    big = {k: v for k, v in res.items() if v > pr["identity_tol"]}
    verdict = VIOLATION if big else CONSISTENT
    note = f"max {max(res.values()):.2e}" + (f"; above tol: {', '.join(big)}" if big else "")
    name = _slug(label) + ".csv"
    return ItemResult(label, [summary_row(label, verdict, note=note)],
                      {name: (["experiment_id", "z_re", "z_im", "identity", "residual"], rows)}, {}, res)


def item_adjoint(cfg, eid, z):
    pr = cfg["params"]
    z = complex(*z)
    eng = ResolventEngine(_profile(cfg), _grid(cfg, pr["adjoint_n"]))
    res = adjoint_law_residual(eng, z)
    label = f"adjoint law z={z.real:g}{z.imag:+g}i"
    verdict = CONSISTENT if res <= pr["adjoint_tol"] else VIOLATION
    return ItemResult(label, [summary_row(label, verdict, note=f"residual {res:.2e}")], detail={"residual": res})


def _data(cfg, grid):
    pr = cfg["params"]
    f = poly_bump(grid.r, pr["data_radius"], pr["data_power"])
    g = pr["g_scale"] * poly_bump(grid.r, pr["g_radius"], pr["g_power"])
    return f, g


def _comparison(cfg, dt, check_dt):
    pr = cfg["params"]
    p, grid = _profile(cfg), _grid(cfg)
    f, g = _data(cfg, grid)
    t_grid = np.linspace(0.0, pr["t_max"], pr["t_count"])
    return profile_comparison(p, grid, f, g, pr["delta"], t_grid, rho1=pr["rho1"],
                              fit_window=(pr["fit_start"], pr["t_max"]), dt=dt, check_dt=check_dt,
                              free_method=pr["free_method"])


def item_decay(cfg, eid, keys, refine):
    pr = cfg["params"]
    rep = _comparison(cfg, pr["dt"], pr["check_dt"])
    rows = []
    fine = _comparison(cfg, rep.extra["dt"] / 2, False) if refine else None
    for key in keys:
        note = ""
        verdict = rep.verdicts[key]
        if key == "ratio":
            note = "monotone" if rep.ratio_monotone else "ratio increases in the fit window"
        if fine is not None and np.isfinite(rep.slopes[key]):
            change = abs(fine.slopes[key] - rep.slopes[key])
            note = (note + "; " if note else "") + f"dt/2 slope change {change:.3g}"
            if change >= REFINE_SLOPE_TOL and verdict == CONSISTENT:
                verdict = INCONCLUSIVE
        rows.append(summary_row(f"{cfg['suite']} d={cfg['profile']['d']} {key}", verdict, rep.predicted[key],
                                rep.slopes[key], note))
    name = "time_series.csv"
    detail = {"dt": rep.extra["dt"], "delta": rep.extra["delta"], "rho1": rep.extra["rho1"],
              "fit_window": list(rep.fit_window), "slopes": rep.slopes, "predicted": rep.predicted,
              "verdicts": rep.verdicts, "ratio_monotone": rep.ratio_monotone}
    if fine is not None:
        detail["slopes_dt_half"] = fine.slopes
    return ItemResult(cfg["suite"], rows, {name: (TIME_COLUMNS, list(rep.rows(eid)))},
                      {name: ("t", ["norm_local", "norm_weighted", "norm_diff"], True)}, detail)


def item_huygens(cfg, eid):
    pr = cfg["params"]
    res, rows = [], []
    for n in pr["n_values"]:
        grid = _grid(cfg, n)
        val = huygens_residual(grid, poly_bump(grid.r, pr["radius"], pr["data_power"]), None, pr["t"], pr["radius"])
        res.append(val)
        rows.append({"experiment_id": eid, "n": n, "residual": float(val)})
    ratios = [a / b for a, b in zip(res, res[1:])]
    ok = res[-1] <= pr["tol"] and all(q >= pr["min_ratio"] for q in ratios)
    label = f"huygens t={pr['t']:g} R={pr['radius']:g}"
    note = f"residual {res[-1]:.2e}; ratios " + ", ".join(f"{q:.3g}" for q in ratios)
    return ItemResult(label, [summary_row(label, CONSISTENT if ok else VIOLATION, note=note)],
                      {"huygens.csv": (["experiment_id", "n", "residual"], rows)},
                      {"huygens.csv": ("n", ["residual"], True)}, {"residuals": res, "ratios": ratios})


def item_mourre(cfg, eid, angle, radius):
    pr = cfg["params"]
    p = _profile(cfg)
    phi = angle_value(angle)
    z = complex(radius * np.exp(1j * phi))
    grid = mourre_grid(p, z, pr["kappa"], pr["h"])
    best, audits = eta_scan(p, grid, z, pr["etas"], pr["margin_tol"], pr["wall"])
    label = f"mourre phi={phi:.4f} r={radius:g}"
    rows = [{"experiment_id": eid, "angle": phi, "r": radius, "eta": a.eta, "margin": a.positivity_margin,
             "relative_margin": a.relative_margin, "range_dim": a.range_dim, "status": a.status} for a in audits]
    out = [summary_row(label + " positivity", best.status, -pr["margin_tol"], best.relative_margin,
                       f"eta={best.eta:.4g}, range dim {best.range_dim}")]
    detail = {"audits": [a.to_dict() for a in audits]}
    if pr["hypotheses"]:
        rep = hypothesis_report(p, grid, z, etas=pr["etas"])
        failed = [i.name for i in rep.items if i.status == "FAIL"]
        out.append(summary_row(label + " hypotheses", VIOLATION if failed else CONSISTENT,
                               note=("FAIL: " + ", ".join(failed)) if failed else "all checked items PASS"))
        detail["hypotheses"] = rep.to_dict()
    name = _slug(label) + ".csv"
    cols = ["experiment_id", "angle", "r", "eta", "margin", "relative_margin", "range_dim", "status"]
    return ItemResult(label, out, {name: (cols, rows)}, {}, detail)


def item_mourre_refinement(cfg, eid, angle, radius):
    pr = cfg["params"]
    z = complex(radius * np.exp(1j * angle_value(angle)))
    res, order = commutator_refinement(_profile(cfg), z, pr["refinement_r_max"], pr["refinement_n"])
    label = f"commutator identity z={z.real:.4g}{z.imag:+.4g}i"
    rows = [{"experiment_id": eid, "n": n, "residual": float(v)} for n, v in zip(pr["refinement_n"], res)]
    verdict = CONSISTENT if order >= 1 else VIOLATION
    return ItemResult(label, [summary_row(label, verdict, 1.0, order, f"residual {res[-1]:.2e} at n={pr['refinement_n'][-1]}")],
                      {"commutator_refinement.csv": (["experiment_id", "n", "residual"], rows)},
                      {"commutator_refinement.csv": ("n", ["residual"], True)}, {"order": order})


def item_synthesis(cfg, eid, t):
    pr = cfg["params"]
    p, grid = _profile(cfg), _grid(cfg)
    f, g = _data(cfg, grid)
    ref = evolve(p, grid, f, g, [t], dt=pr["dt"])[-1].u
    checks = [fourier_synthesis_crosscheck(p, grid, f, g, mu, t, reference=ref, tau_max=pr["tau_max"], tol=pr["tol"])
              for mu in pr["mu_values"]]
    rows, out = [], []
    for c in checks:
        rows.append({"experiment_id": eid, "t": t, "mu": c.mu, "deviation": c.deviation,
                     "tail_change": c.tail_change, "verdict": c.verdict})
        out.append(summary_row(f"synthesis t={t:g} mu={c.mu:g}", c.verdict, pr["tol"], c.deviation,
                               f"tail change {c.tail_change:.2e}"))
    spread = max(grid.norm(a.u - b.u) / grid.norm(b.u) for a in checks for b in checks)
    out.append(summary_row(f"synthesis t={t:g} mu-independence", CONSISTENT if spread <= pr["tol"] else VIOLATION,
                           pr["tol"], spread))
    name = f"synthesis_t{t:g}.csv"
    return ItemResult(f"synthesis t={t:g}", out,
                      {name: (["experiment_id", "t", "mu", "deviation", "tail_change", "verdict"], rows)}, {},
                      {"mu_spread": spread})


# ---------------------------------------------------------------------------
# expansion


def expand(cfg) -> list:
    """``[(label, function, kwargs), ...]`` in a fixed order."""
    pr = cfg["params"]
    suite = cfg["suite"]
    if suite == "coeffs":
        return [(c, item_coeffs, {"component": c}) for c in ("g", "w", "a")]
    if suite == "resolvent-scan":
        return [(f"{a}/{n}/{k}", item_resolvent_scan, {"angle": a, "n": n, "kind": k})
                for a in pr["angles"] for n in pr["n_values"] for k in pr["kinds"]]
    if suite == "weight-scan":
        return [(f"s={s}", item_weight_scan, {"s": float(s)}) for s in pr["s_values"]]
    if suite == "theta-scan":
        return [(f"sigma={s}", item_theta_scan, {"sigma": int(s)}) for s in pr["sigma_values"]]
    if suite == "identity-tests":
        zs = [tuple(map(float, z)) for z in pr["z_values"]]
        return ([(f"id {z}", item_identity, {"z": z}) for z in zs]
                + [(f"adj {z}", item_adjoint, {"z": z}) for z in zs])
    if suite == "decay-run":
        return [("decay", item_decay, {"keys": ["local"], "refine": False})]
    if suite == "profile-compare":
        return [("compare", item_decay, {"keys": ["local", "diff", "ratio"], "refine": True})]
    if suite == "huygens":
        return [("huygens", item_huygens, {})]
    if suite == "mourre":
        items = [(f"{a}/{r}", item_mourre, {"angle": a, "radius": float(r)})
                 for a in pr["angles"] for r in pr["radii"]]
        a0, r0 = pr["angles"][0], float(pr["radii"][0])
        return items + [("refinement", item_mourre_refinement, {"angle": a0, "radius": r0})]
    if suite == "synthesis-check":
        return [(f"t={t}", item_synthesis, {"t": float(t)}) for t in pr["t_values"]]
    raise ValueError(f"unknown suite {suite!r}")  # pragma: no cover


def run_item(fn, cfg, eid, label, kwargs) -> ItemResult:
    """Run one item; exceptions become an ``ERROR`` row."""
    try:
        return fn(cfg, eid, **kwargs)
    except Exception as exc:  # recorded, siblings keep running
        logger.error("item %s failed: %s", label, exc)
        return ItemResult(label, [summary_row(label, ERROR, note=f"{type(exc).__name__}: {exc}")],
                          detail={"traceback": traceback.format_exc()})
