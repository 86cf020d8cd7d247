"""Radial coefficient profiles for the damped wave operator.

The metric is scalar, ``G(x) = g(|x|) Id``, and the density ``w`` and the
damping ``a`` are radial.  The built-in family is

    g(r) = 1 + g_amp <r>^{-rho0},   w(r) = 1 + w_amp <r>^{-rho0},
    a(r) = a_amp <r>^{-1-rho0},

with ``<r> = (1 + r^2)^{1/2}``, plus optional even Gaussian bumps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

AMPLITUDE_CAP = 0.5
COMPONENTS = ("g", "w", "a")


class ProfileError(ValueError):
    """Raised when a coefficient profile violates its hypotheses."""


class NotInSymbolClass(ValueError):
    """Raised when a symbol seminorm diverges."""


def japanese(r):
    """Return ``<r> = sqrt(1 + r^2)``."""
    r = np.asarray(r, dtype=float)
    return np.sqrt(1.0 + r * r)


def _power_derivs(r, p, m):
    """m-th derivative of ``<r>^{-p}`` for m in {0, 1, 2}."""
    jr2 = 1.0 + r * r
    if m == 0:
        return jr2 ** (-p / 2)
    if m == 1:
        return -p * r * jr2 ** (-p / 2 - 1)
    if m == 2:
        return -p * jr2 ** (-p / 2 - 1) + p * (p + 2) * r * r * jr2 ** (-p / 2 - 2)
    raise ValueError("closed-form derivatives are available up to order 2")


@dataclass(frozen=True)
class Bump:
    """Even Gaussian bump ``height * (e^{-((r-c)/w)^2} + e^{-((r+c)/w)^2})``."""

    component: str
    center: float
    width: float
    height: float

    def __post_init__(self):
        if self.component not in COMPONENTS:
            raise ProfileError(f"bump component must be one of {COMPONENTS}, got {self.component!r}")
        if self.width <= 0:
            raise ProfileError("bump width must be positive")
        if self.center < 0:
            raise ProfileError("bump center must be nonnegative")

    def __call__(self, r, m=0):
        out = np.zeros_like(np.asarray(r, dtype=float))
        for c in (self.center, -self.center):
            x = (r - c) / self.width
            e = np.exp(-x * x)
            if m == 0:
                out = out + e
            elif m == 1:
                out = out - 2 * x * e / self.width
            elif m == 2:
                out = out + (4 * x * x - 2) * e / self.width**2
            else:
                raise ValueError("closed-form derivatives are available up to order 2")
        return self.height * out


@dataclass(frozen=True)
class CoefficientProfile:
    """Radial coefficient triple ``(g, w, a)``.

    Parameters
    ----------
    d : int
        Space dimension, ``d >= 3``.
    rho0 : float
        Decay rate in ``(0, 1]``.
    g_amp, w_amp : float
        Amplitudes of the long-range metric and density perturbations.
    a_amp : float
        Damping amplitude, nonnegative.
    bumps : tuple of Bump
        Additive smooth bumps.
    """

    d: int
    rho0: float = 1.0
    g_amp: float = 0.0
    w_amp: float = 0.0
    a_amp: float = 0.0
    bumps: tuple = field(default_factory=tuple)

    def _eval(self, name, r, m, base, amp, power):
        r = np.asarray(r, dtype=float)
        out = amp * _power_derivs(r, power, m) if amp else np.zeros_like(r)
        if m == 0 and base:
            out = out + base
        for b in self.bumps:
            if b.component == name:
                out = out + b(r, m)
        return out

    def g(self, r, m=0):
        """Metric coefficient or its m-th radial derivative."""
        return self._eval("g", r, m, 1.0, self.g_amp, self.rho0)

    def w(self, r, m=0):
        """Density coefficient or its m-th radial derivative."""
        return self._eval("w", r, m, 1.0, self.w_amp, self.rho0)

    def a(self, r, m=0):
        """Damping coefficient or its m-th radial derivative."""
        return self._eval("a", r, m, 0.0, self.a_amp, 1.0 + self.rho0)

    def component(self, name: str) -> Callable:
        return {"g": self.g, "w": self.w, "a": self.a}[name]

    def perturbation(self, name: str) -> Callable:
        """Return ``g - 1``, ``w - 1`` or ``a`` as a callable ``(r, m=0)``."""
        amp, power = {"g": (self.g_amp, self.rho0), "w": (self.w_amp, self.rho0),
                      "a": (self.a_amp, 1.0 + self.rho0)}[name]

        def pert(r, m=0):
            # evaluated without the unit offset to keep relative accuracy far out
            return self._eval(name, r, m, 0.0, amp, power)

        return pert

    @property
    def is_free(self) -> bool:
        return self.g_amp == 0 and self.w_amp == 0 and self.a_amp == 0 and not self.bumps

    @property
    def d0(self) -> int:
        return self.d // 2 + 1

    def sample_radii(self, r_max: float = 1e3) -> np.ndarray:
        """Radii used for the hypothesis checks (dense near bumps)."""
        r = np.concatenate([np.linspace(0.0, 10.0, 2001), np.geomspace(10.0, r_max, 400)])
        for b in self.bumps:
            r = np.concatenate([r, np.linspace(max(b.center - 6 * b.width, 0.0), b.center + 6 * b.width, 401)])
        return np.unique(r)

    def ellipticity_constants(self) -> tuple[float, float]:
        """Sampled ``(C_G, C_w)`` with ``C^{-1} <= coefficient <= C``."""
        r = self.sample_radii()
        g, w = self.g(r), self.w(r)
        if g.min() <= 0 or w.min() <= 0:
            raise ProfileError("g and w must stay positive")
        cg = max(g.max(), 1.0 / g.min(), 1.0)
        cw = max(w.max(), 1.0 / w.min(), 1.0)
        return float(cg), float(cw)

    @property
    def w_min(self) -> float:
        return float(self.w(self.sample_radii()).min())

    def propagation_speed(self) -> float:
        """``gamma = max(C_G, C_w)``, a bound on the propagation speed."""
        return max(self.ellipticity_constants())

    def decay_constants(self) -> dict:
        """Grid sup of ``<r>^{rho0}(|g-1|+|w-1|)`` and ``<r>^{1+rho0}|a|``."""
        r = self.sample_radii()
        jr = japanese(r)
        lr = (np.abs(self.g(r) - 1) + np.abs(self.w(r) - 1)) * jr**self.rho0
        sr = np.abs(self.a(r)) * jr ** (1 + self.rho0)
        return {"long_range": float(lr.max()), "short_range": float(sr.max())}


def build_profile(d: int, rho0: float = 1.0, g_amp: float = 0.0, w_amp: float = 0.0,
                  a_amp: float = 0.0, bumps: Optional[Sequence] = None) -> CoefficientProfile:
    """Build and validate a coefficient profile.

    Parameters
    ----------
    d : int
        Dimension, at least 3.
    rho0 : float
        Decay rate in ``(0, 1]``.
    g_amp, w_amp : float
        Long-range amplitudes, ``|amp| <= 0.5``.
    a_amp : float
        Damping amplitude, ``0 <= a_amp <= 0.5``.
    bumps : sequence of Bump or dict, optional
        Dicts need keys ``component, center, width, height``.

    Returns
    -------
    CoefficientProfile

    Raises
    ------
    ProfileError
        If ellipticity, positivity of ``w`` or nonnegativity of ``a`` fails.
    """
    if int(d) != d or d < 3:
        raise ProfileError(f"dimension must be an integer >= 3, got {d}")
    if not 0 < rho0 <= 1:
        raise ProfileError(f"rho0 must lie in (0, 1], got {rho0}")
    for name, amp in (("g_amp", g_amp), ("w_amp", w_amp), ("a_amp", a_amp)):
        if abs(amp) > AMPLITUDE_CAP:
            raise ProfileError(f"|{name}| must be <= {AMPLITUDE_CAP}, got {amp}")
    if a_amp < 0:
        raise ProfileError("damping amplitude must be nonnegative")
    bl = []
    for b in bumps or ():
        bl.append(b if isinstance(b, Bump) else Bump(**b))
    prof = CoefficientProfile(int(d), float(rho0), float(g_amp), float(w_amp), float(a_amp), tuple(bl))
    r = prof.sample_radii()
    if prof.a(r).min() < 0:
        raise ProfileError("damping coefficient must be nonnegative")
    prof.ellipticity_constants()
    logger.debug("profile built: %s", prof)
    return prof


@dataclass(frozen=True)
class SeminormEstimate:
    """Grid estimate of ``sup_{m <= max_order} sup_r <r>^{kappa+m} |d^m phi|``."""

    kappa: float
    max_order: int
    value: float
    per_order: tuple


def _fd_derivative(fn, r, m, step):
    """Centered finite-difference m-th derivative with Richardson extrapolation."""
    from scipy.special import comb

    def raw(hs):
        acc = np.zeros_like(r)
        for k in range(m + 1):
            acc = acc + (-1) ** k * comb(m, k) * fn(r + (m / 2 - k) * hs)
        return acc / hs**m

    d1, d2 = raw(step), raw(step / 2)
    return (4 * d2 - d1) / 3


def _derivative(fn, r, m, step):
    if m == 0:
        return fn(r)
    try:
        return fn(r, m)
    except (TypeError, ValueError):
        # even extension keeps the stencil valid near r = 0
        return _fd_derivative(lambda x: fn(np.abs(x)), r, m, step)


def seminorm(fn: Callable, kappa: float, max_order: int = 2, r_max: float = 2.0**20,
             points: int = 4000) -> SeminormEstimate:
    """Estimate the symbol seminorm of a radial function.

    Parameters
    ----------
    fn : callable
        ``fn(r)`` or ``fn(r, m)``; closed-form derivatives are used when the
        call accepts ``m``, finite differences otherwise.
    kappa : float
        Decay index, ``kappa >= 0``.
    max_order : int
        Highest derivative order checked.
    r_max : float
        Outer end of the dyadic sampling grid.
    points : int
        Base number of sample points; the convergence guard doubles it.

    Returns
    -------
    SeminormEstimate

    Raises
    ------
    NotInSymbolClass
        If the weighted sup keeps growing towards ``r_max`` or fails the
        refinement guard.
    """
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")

    def estimate(npts):
        r = np.unique(np.concatenate([np.linspace(0.0, 8.0, npts), np.geomspace(8.0, r_max, npts)]))
        jr = japanese(r)
        step = 1e-3 * jr
        per, tails = [], []
        for m in range(max_order + 1):
            vals = jr ** (kappa + m) * np.abs(_derivative(fn, r, m, step))
            per.append(float(vals.max()))
            # sup over successive dyadic shells far out
            shells = [vals[(r >= 2.0**k) & (r < 2.0 ** (k + 1))].max() for k in range(10, int(np.log2(r_max)))]
            tails.append(np.asarray(shells))
        return per, tails

    per, tails = estimate(points)
    for m, sh in enumerate(tails):
        if sh.size >= 4 and sh[-1] > 1e-300 and sh[-1] > 1.5 * sh[0] and np.all(np.diff(sh[-4:]) > 0):
            raise NotInSymbolClass(f"order {m}: weighted sup grows like a power of r (ratio {sh[-1] / sh[0]:.3g} over 10 octaves)")
    per2, _ = estimate(2 * points)
    value, value2 = max(per), max(per2)
    if value2 > 0 and abs(value2 - value) > 0.05 * value2:
        raise NotInSymbolClass(f"seminorm estimate not converged under refinement ({value:.4g} vs {value2:.4g})")
    return SeminormEstimate(float(kappa), int(max_order), float(value2), tuple(per2))
