"""Frequency scans of weighted resolvent norms and log-log slope checks.

The bounds under test are upper bounds ``norm(r) <= C r^p`` as ``r = |z|``
goes to zero, so a scan is a ``VIOLATION`` only when the fitted slope lies
below the predicted exponent by more than the tolerance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .coefficients import CoefficientProfile
from .norms import POWER_MAXITER, POWER_SEED, POWER_TOL, PowerIterationError, fit_loglog, power_norm
from .radial import SectorGrid, SobolevScale, free_spectrum, weight
from .resolvent import (Derivative, DerivativeDifference, ResolventEngine, SolverError, Spec,
                        weighted_norm)

logger = logging.getLogger(__name__)

CONSISTENT = "CONSISTENT"
VIOLATION = "VIOLATION"
INCONCLUSIVE = "INCONCLUSIVE"

SLOPE_TOL = 0.15
RESIDUAL_MAX = 0.5
FAILURE_FRACTION = 0.2
BOUNDED_FACTOR = 3.0
FIT_R_MAX = 0.1
RAY_ANGLES = {"elliptic": np.pi / 2, "diagonal": np.pi / 4, "near_real": 0.05}


def default_r_samples(r_min: float = 1e-3, r_max: float = 0.3, count: int = 12) -> np.ndarray:
    return np.geomspace(r_min, r_max, count)


def resolvent_exponent(d: int, n: int) -> float:
    """Exponent of the bound on ``R^{(n)}``: ``min(d - n - 2, 0)``."""
    return float(min(d - n - 2, 0))


def difference_exponent(d: int, n: int, rho1: float) -> float:
    """Exponent of the bound on ``R^{(n)} - R0^{(n)}``: ``min(d + rho1 - n - 2, 0)``."""
    return float(min(d + rho1 - n - 2, 0))


def theta_window(d: int, sigma: int, rho: float) -> tuple[float, float]:
    """Open interval of admissible source regularities for ``theta_sigma``."""
    sp = 1 if sigma == 2 else 0
    return (-d / 2 - sp + sigma + rho, d / 2 + sp)


def growth_factor(norms: Sequence[float]) -> float:
    """Largest increase ``norm(r_i)/norm(r_j)`` over pairs ``r_i <= r_j``.

    Samples are assumed sorted by increasing ``r``.  A bounded family has a
    moderate growth factor; a family that decays as ``r -> 0`` has 1.
    """
    v = np.asarray(norms, float)
    best = 1.0
    for j in range(v.size):
        if v[j] > 0:
            best = max(best, float(v[: j + 1].max() / v[j]))
    return best


@dataclass(frozen=True)
class TruncationPolicy:
    """Choice of the radial box for a frequency sample.

    ``r_max = clip(kappa / Im z, r_max_min, r_max_cap)`` at fixed step
    ``h``: waves reflected by the Dirichlet wall return damped by about
    ``exp(-2 kappa)``.  With ``kappa=None`` the box is fixed to
    ``(r_max_min, n)``.
    """

    h: float = 0.1
    kappa: Optional[float] = 12.0
    r_max_min: float = 120.0
    r_max_cap: float = 2.0e4
    n: Optional[int] = None

    def grid(self, d: int, z: complex, ell: int = 0) -> SectorGrid:
        if self.kappa is None:
            n = self.n or int(round(self.r_max_min / self.h)) - 1
            return SectorGrid(d, ell, self.r_max_min, n)
        r_max = float(np.clip(self.kappa / complex(z).imag, self.r_max_min, self.r_max_cap))
        return SectorGrid(d, ell, r_max, int(round(r_max / self.h)) - 1)

    @classmethod
    def fixed(cls, r_max: float = 120.0, n: int = 4096) -> "TruncationPolicy":
        return cls(h=r_max / (n + 1), kappa=None, r_max_min=r_max, n=n)

    def doubled(self) -> "TruncationPolicy":
        """Policy with twice the box (for the truncation study)."""
        if self.kappa is None:
            return replace(self, r_max_min=2 * self.r_max_min, n=2 * (self.n or 0) + 1)
        return replace(self, kappa=2 * self.kappa, r_max_min=2 * self.r_max_min, r_max_cap=2 * self.r_max_cap)

    def refined(self) -> "TruncationPolicy":
        """Policy with half the step on the same boxes."""
        if self.kappa is None:
            return replace(self, h=self.h / 2, n=2 * (self.n or 0) + 1)
        return replace(self, h=self.h / 2)


@dataclass(frozen=True)
class ScanSpec:
    """Description of one resolvent scan.

    Attributes
    ----------
    spec : operator description
        Anything accepted by :meth:`ResolventEngine.apply`.
    angle : float
        Ray angle ``phi``; samples are ``z = r e^{i phi}``.
    r_samples : sequence of float
    delta_left, delta_right : float
    predicted_exponent : float
    ell_max : int
    fit_r_max : float
        Largest radius included in the fit.
    cap : float, optional
        Absorbing-potential strength.
    label : str
    """

    spec: Spec
    angle: float = np.pi / 2
    r_samples: tuple = tuple(default_r_samples())
    delta_left: float = 0.0
    delta_right: float = 0.0
    predicted_exponent: float = 0.0
    ell_max: int = 0
    fit_r_max: float = FIT_R_MAX
    cap: Optional[float] = None
    label: str = ""

    def __post_init__(self):
        rs = np.asarray(self.r_samples, float)
        if np.any(np.diff(rs) <= 0) or rs.min() <= 0 or rs.max() > 1:
            raise ValueError("r-samples must be sorted, positive and at most 1")
        if not 0 < self.angle < np.pi:
            raise ValueError("ray must lie in the open upper half-plane")

    def frequency(self, r: float) -> complex:
        return complex(r * np.exp(1j * self.angle))


@dataclass(frozen=True)
class Sample:
    r: float
    norm: float
    ell_argmax: int
    ok: bool = True
    note: str = ""


@dataclass
class ScalingReport:
    """Result of a scan: samples, fit and verdict."""

    label: str
    samples: list
    slope: float
    residual: float
    predicted_exponent: float
    verdict: str
    fit_range: tuple
    growth: float
    tol: float = SLOPE_TOL
    extra: dict = field(default_factory=dict)

    @property
    def norms(self) -> np.ndarray:
        return np.array([s.norm for s in self.samples])

    @property
    def radii(self) -> np.ndarray:
        return np.array([s.r for s in self.samples])

    @property
    def bounded(self) -> bool:
        """Boundedness witness used for exponent-0 bounds."""
        return self.growth < BOUNDED_FACTOR

    @property
    def sharp(self) -> bool:
        return abs(self.slope - self.predicted_exponent) <= 0.2

    def rows(self, experiment_id: str):
        for s in self.samples:
            yield {"experiment_id": experiment_id, "r": s.r, "ell_argmax": s.ell_argmax,
                   "norm": s.norm if s.ok else float("nan"),
                   "predicted_exponent": self.predicted_exponent,
                   "fitted_slope": self.slope, "verdict": self.verdict}


def make_report(label, samples, predicted, fit_r_max=FIT_R_MAX, tol=SLOPE_TOL, extra=None) -> ScalingReport:
    """Fit the samples and assign a verdict."""
    good = [s for s in samples if s.ok and s.norm > 0]
    failures = sum(not s.ok for s in samples)
    if not good and failures <= FAILURE_FRACTION * len(samples):
        # identically vanishing operator (e.g. theta_0 for the free profile)
        return ScalingReport(label, samples, float("inf"), 0.0, predicted, CONSISTENT,
                             (samples[0].r, samples[-1].r), 1.0, tol, extra or {})
    usable = sorted(good, key=lambda s: s.r)
    usable = [s for s in usable if s.r <= fit_r_max * (1 + 1e-12)]
    if len(usable) < 3 or failures > FAILURE_FRACTION * len(samples):
        return ScalingReport(label, samples, float("nan"), float("nan"), predicted, INCONCLUSIVE,
                             (np.nan, np.nan), float("nan"), tol, extra or {})
    fit = fit_loglog([s.r for s in usable], [s.norm for s in usable])
    growth = growth_factor([s.norm for s in usable])
    if fit.slope < predicted - tol:
        verdict = VIOLATION
    elif fit.residual > RESIDUAL_MAX:
        verdict = INCONCLUSIVE
    else:
        verdict = CONSISTENT
    return ScalingReport(label, samples, fit.slope, fit.residual, predicted, verdict,
                         (usable[0].r, usable[-1].r), growth, tol, extra or {})


def scan_resolvent(profile: CoefficientProfile, scan: ScanSpec,
                   policy: TruncationPolicy = TruncationPolicy(), tol: float = POWER_TOL,
                   maxiter: int = POWER_MAXITER, seed: int = POWER_SEED) -> ScalingReport:
    """Measure a weighted resolvent norm along a ray and fit its slope.

    Parameters
    ----------
    profile : CoefficientProfile
    scan : ScanSpec
    policy : TruncationPolicy
        Box selection per sample.

    Returns
    -------
    ScalingReport
    """
    samples = []
    for r in scan.r_samples:
        z = scan.frequency(r)
        grid = policy.grid(profile.d, z)
        try:
            wn = weighted_norm(profile, grid, scan.spec, z, scan.delta_left, scan.delta_right,
                               ell_max=scan.ell_max, cap=scan.cap, tol=tol, maxiter=maxiter, seed=seed)
            samples.append(Sample(float(r), wn.value, wn.ell_argmax))
        except (SolverError, PowerIterationError) as exc:
            logger.warning("sample r=%g failed: %s", r, exc)
            samples.append(Sample(float(r), float("nan"), -1, False, str(exc)))
    extra = {"angle": scan.angle, "delta": (scan.delta_left, scan.delta_right), "ell_max": scan.ell_max}
    return make_report(scan.label, samples, scan.predicted_exponent, scan.fit_r_max, extra=extra)


def theorem_scans(d: int, rho1: float, n_values: Sequence[int], angle: float = np.pi / 2,
                  delta_offset: float = 0.6, ell_max: int = 0, r_samples=None) -> list:
    """Scans of ``R^{(n)}`` and ``R^{(n)} - R0^{(n)}`` with ``delta = n + 2 + delta_offset``."""
    rs = tuple(default_r_samples() if r_samples is None else r_samples)
    out = []
    for n in n_values:
        delta = n + 2 + delta_offset
        out.append(ScanSpec(Derivative(n), angle, rs, delta, delta, resolvent_exponent(d, n), ell_max,
                            label=f"d={d} n={n} R^(n) phi={angle:.4f}"))
        out.append(ScanSpec(DerivativeDifference(n), angle, rs, delta, delta, difference_exponent(d, n, rho1),
                            ell_max, label=f"d={d} n={n} R^(n)-R0^(n) phi={angle:.4f}"))
    return out


def truncation_study(profile, scan: ScanSpec, policy: TruncationPolicy = TruncationPolicy(),
                     r_values=None) -> dict:
    """Relative norm change when the box is doubled, per sample radius."""
    r_values = scan.r_samples if r_values is None else r_values
    sub = replace(scan, r_samples=tuple(r_values), fit_r_max=1.0)
    a = scan_resolvent(profile, sub, policy).norms
    b = scan_resolvent(profile, sub, policy.doubled()).norms
    return {float(r): float(abs(x - y) / abs(y)) for r, x, y in zip(r_values, a, b)}


def refinement_study(profile, scan: ScanSpec, policy: TruncationPolicy = TruncationPolicy(),
                     r_values=None) -> dict:
    """Relative norm change when the radial step is halved."""
    r_values = scan.r_samples if r_values is None else r_values
    sub = replace(scan, r_samples=tuple(r_values), fit_r_max=1.0)
    a = scan_resolvent(profile, sub, policy).norms
    b = scan_resolvent(profile, sub, policy.refined()).norms
    return {float(r): float(abs(x - y) / abs(y)) for r, x, y in zip(r_values, a, b)}


# ---------------------------------------------------------------------------
# Sobolev-scale scans


def sobolev_norm(scale: SobolevScale, s_from: float, s_to: float, apply, apply_adjoint,
                 tol=POWER_TOL, maxiter=POWER_MAXITER, seed=POWER_SEED) -> float:
    """``||T||_{L(H^{s_from}, H^{s_to})}`` by power iteration."""
    fwd = lambda v: scale.apply(s_to, apply(scale.apply(-s_from, v)))
    adj = lambda v: scale.apply(-s_from, apply_adjoint(scale.apply(s_to, v)))
    return power_norm(fwd, adj, scale.grid.q, tol=tol, maxiter=maxiter, seed=seed).value


def dense_sobolev_norm(scale: SobolevScale, s_from: float, s_to: float, T: np.ndarray) -> float:
    """Dense SVD oracle for ``||T||_{L(H^{s_from}, H^{s_to})}``."""
    sp = scale.spectrum
    sq = np.sqrt(scale.grid.q)
    # eigen-coordinates: c = V^T Q^{1/2} u
    M = sp.vectors.T @ (sq[:, None] * T / sq[None, :]) @ sp.vectors
    M = scale.multiplier(s_to)[:, None] * M * scale.multiplier(-s_from)[None, :]
    return float(np.linalg.norm(M, 2))


def weight_operator(grid: SectorGrid, r: float, s: float, delta: float):
    """Forward and adjoint actions of ``<x>^{-delta} <D_r>^{-s}`` plus the scale."""
    S = SobolevScale(grid, r)
    wt = weight(grid, delta)
    return S, (lambda v: wt * S.apply(-s, v)), (lambda v: S.apply(-s, wt * v))


def scan_weight(grid: SectorGrid, s: float, delta: float, r_samples=None, fit_r_max: float = FIT_R_MAX,
                label: str = "") -> ScalingReport:
    """Norms of ``<x>^{-delta} <D_r>^{-s}`` on ``L^2``; predicted slope ``s``.

    Raises
    ------
    ValueError
        If ``s`` lies outside ``[0, d/2)``.
    """
    if not 0 <= s < grid.d / 2:
        raise ValueError("s must lie in [0, d/2)")
    if delta <= s:
        logger.warning("delta=%g <= s=%g: outside the hypotheses, slope is informational", delta, s)
    rs = default_r_samples() if r_samples is None else r_samples
    samples = []
    for r in rs:
        S, fwd, adj = weight_operator(grid, r, s, delta)
        val = power_norm(fwd, adj, grid.q).value
        samples.append(Sample(float(r), val, grid.ell))
    rep = make_report(label or f"weight s={s} delta={delta}", samples, float(s), fit_r_max)
    if delta <= s:
        # hypothesis violated: the slope is a witness, not a test
        rep.verdict = INCONCLUSIVE
    rep.extra.update({"s": s, "delta": delta, "upper": s + 0.3})
    return rep


def theta_operator(engine: ResolventEngine, z: complex, sigma: int):
    kind = f"theta{sigma}"
    return (lambda v: engine.apply_factor(kind, z, v)), (lambda v: engine.apply_factor(kind, z, v, adjoint=True))


def scan_theta(profile: CoefficientProfile, grid: SectorGrid, sigma: int, rho: float, s: Optional[float] = None,
               r_samples=None, angle: float = np.pi / 2, fit_r_max: float = FIT_R_MAX, label: str = "") -> ScalingReport:
    """Norms of ``theta_sigma(z)`` from ``H_z^s`` to ``H_z^{s - sigma - rho}``.

    ``s`` defaults to the midpoint of the admissible window.  The predicted
    slope is ``sigma + rho``.
    """
    if sigma not in (0, 1, 2):
        raise ValueError("sigma must be 0, 1 or 2")
    if not 0 < rho < profile.rho0:
        raise ValueError("rho must lie in (0, rho0)")
    lo, hi = theta_window(profile.d, sigma, rho)
    if s is None:
        s = 0.5 * (lo + hi)
    if not lo < s < hi:
        raise ValueError(f"s={s} outside the admissible window ({lo}, {hi})")
    engine = ResolventEngine(profile, grid)
    spectrum = free_spectrum(grid)
    rs = default_r_samples() if r_samples is None else r_samples
    samples = []
    for r in rs:
        z = complex(r * np.exp(1j * angle))
        S = SobolevScale(grid, abs(z), spectrum)
        fwd, adj = theta_operator(engine, z, sigma)
        val = sobolev_norm(S, s, s - sigma - rho, fwd, adj)
        samples.append(Sample(float(r), val, grid.ell))
    rep = make_report(label or f"theta{sigma} s={s:.3f} rho={rho}", samples, float(sigma + rho), fit_r_max)
    rep.extra.update({"sigma": sigma, "s": s, "rho": rho})
    return rep
