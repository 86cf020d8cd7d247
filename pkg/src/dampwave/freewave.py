"""Free wave propagators on a radial sector.

``u0(t) = cos(t sqrt(-Delta)) f0 + sin(t sqrt(-Delta))/sqrt(-Delta) g0`` is
evaluated exactly in time, either from the eigendecomposition of the free
sector Laplacian or, on large grids, from a Chebyshev expansion of the same
spectral functions (matrix-free, same discrete operator).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.fft import dct
from scipy.integrate import cumulative_trapezoid

from .radial import SectorGrid, assemble_laplacian, free_spectrum

logger = logging.getLogger(__name__)

DENSE_LIMIT = 4096
SUPPORT_TOL = 1e-12


class SupportError(ValueError):
    """Data too close to the outer boundary for the requested time."""


@dataclass
class WaveState:
    """Solution snapshot; ``v`` is ``w du/dt`` (``du/dt`` for the free wave)."""

    t: float
    u: np.ndarray
    v: np.ndarray


def smooth_bump(r, radius: float = 1.0, center: float = 0.0):
    """``exp(1 - 1/(1 - x^2))`` on ``|x| < 1`` with ``x = (r - center)/radius``; zero outside."""
    x = (np.asarray(r, float) - center) / radius
    out = np.zeros_like(x)
    m = np.abs(x) < 1
    out[m] = np.exp(1.0 - 1.0 / (1.0 - x[m] ** 2))
    return out


def poly_bump(r, radius: float = 1.0, power: int = 3):
    """``(1 - (r/R)^2)^p`` on ``r < R``, zero outside; ``C^{p-1}`` across ``r = R``.

    Its Fourier transform decays algebraically, so grid errors stay visible
    above rounding (a ``C^inf`` bump drives them to the rounding floor).
    """
    x = np.asarray(r, float) / radius
    return np.clip(1.0 - x * x, 0.0, None) ** power


def support_radius(grid: SectorGrid, *vectors) -> float:
    """Largest node radius where any vector exceeds ``1e-12`` of its max."""
    rad = 0.0
    for v in vectors:
        a = np.abs(np.asarray(v))
        if a.max() == 0:
            continue
        idx = np.nonzero(a > SUPPORT_TOL * a.max())[0]
        rad = max(rad, float(grid.r[idx[-1]]))
    return rad


def _sinc_t(lam, t):
    """``sin(t sqrt(lam))/sqrt(lam)`` with the limit ``t`` at ``lam = 0``."""
    k = np.sqrt(np.maximum(lam, 0.0))
    out = np.full_like(k, float(t))
    m = k > 0
    out[m] = np.sin(t * k[m]) / k[m]
    return out


class FreePropagator:
    """Evaluators ``cos(t sqrt(-Delta))`` and ``sin(t sqrt(-Delta))/sqrt(-Delta)``.

    Parameters
    ----------
    grid : SectorGrid
    method : {"auto", "spectral", "chebyshev"}
        ``"auto"`` uses the eigendecomposition up to ``n = 4096`` and the
        Chebyshev expansion above (the dense eigenvectors need ``8 n^2``
        bytes).
    """

    def __init__(self, grid: SectorGrid, method: str = "auto"):
        if method == "auto":
            method = "spectral" if grid.n <= DENSE_LIMIT else "chebyshev"
        if method not in ("spectral", "chebyshev"):
            raise ValueError(f"unknown method {method!r}")
        self.grid = grid
        self.method = method
        self.L = assemble_laplacian(None, grid)
        if method == "spectral":
            self.spectrum = free_spectrum(grid)
        else:
            self.spectrum = None
            D = self.L.diags
            # Gershgorin bound for the spectrum of -Delta
            self.lam_max = float(np.max(np.abs(D[1]) + np.abs(D[2]) + np.abs(D[3]))) * 1.01

    # -- spectral functions ---------------------------------------------
    def _neg_lap(self, u):
        return -(self.L @ u)

    def _cheb_apply(self, fn: Callable, u, degree_hint: float):
        lm = self.lam_max
        K = int(1.3 * degree_hint + 64)
        x = np.cos(np.pi * (np.arange(K) + 0.5) / K)
        c = dct(fn(0.5 * lm * (x + 1)), type=2) / K
        c[0] *= 0.5
        keep = np.nonzero(np.abs(c) > 1e-17 * np.abs(c).max())[0]
        c = c[: keep[-1] + 1]
        X = lambda v: (2.0 / lm) * self._neg_lap(v) - v
        t0 = np.asarray(u, dtype=float if np.isrealobj(u) else complex)
        out = c[0] * t0
        if c.size == 1:
            return out
        t1 = X(t0)
        out = out + c[1] * t1
        for ck in c[2:]:
            t0, t1 = t1, 2 * X(t1) - t0
            out = out + ck * t1
        return out

    def apply_function(self, fn: Callable, u, degree_hint: float = 0.0):
        """Apply ``fn(-Delta)`` for a function ``fn`` of the eigenvalue."""
        if self.method == "spectral":
            return self.spectrum.apply_function(fn(self.spectrum.values), u)
        return self._cheb_apply(fn, u, degree_hint)

    def _hint(self, t):
        return abs(t) * np.sqrt(self.lam_max) if self.spectrum is None else 0.0

    def cos(self, t: float, u):
        return self.apply_function(lambda lam: np.cos(t * np.sqrt(np.maximum(lam, 0.0))), u, self._hint(t))

    def sin(self, t: float, u):
        """``sin(t sqrt(-Delta))/sqrt(-Delta) u``."""
        return self.apply_function(lambda lam: _sinc_t(lam, t), u, self._hint(t))

    def state(self, f0, g0, t: float) -> WaveState:
        """``(u0(t), d_t u0(t))``."""
        s_f = self.sin(t, f0)
        u = self.cos(t, f0) + self.sin(t, g0)
        v = -self._neg_lap(s_f) + self.cos(t, g0)
        return WaveState(float(t), u, v)

    def energy(self, state: WaveState) -> float:
        """``||grad u||^2 + ||d_t u||^2`` (the centrifugal part included)."""
        g = self.grid
        return float(g.inner(self._neg_lap(state.u), state.u).real + g.norm(state.v) ** 2)


def free_solution(grid: SectorGrid, f0, g0, t: float, propagator: Optional[FreePropagator] = None,
                  check_support: bool = True) -> WaveState:
    """Free wave at time ``t`` with data ``(f0, g0)``.

    Raises
    ------
    SupportError
        If ``support + t`` reaches ``r_max``: the Dirichlet wall would
        reflect the wave back.
    """
    f0 = np.asarray(f0)
    g0 = np.zeros_like(f0) if g0 is None else np.asarray(g0)
    if check_support:
        supp = support_radius(grid, f0, g0)
        if supp + abs(t) >= grid.r_max:
            raise SupportError(f"support {supp:.3g} + t {t:.3g} reaches r_max {grid.r_max:.3g}")
    prop = propagator or FreePropagator(grid)
    return prop.state(f0, g0, t)


def huygens_residual(grid: SectorGrid, f0, g0, t: float, radius: float,
                     propagator: Optional[FreePropagator] = None) -> float:
    """``||u0(t)||_{L2(B(R))} / ||(f0, g0)||`` for data supported in ``B(R)``.

    The denominator is ``sqrt(||f0||^2 + ||g0||^2)``.  In odd dimensions the
    residual vanishes for ``t >= 2R`` up to discretization error.

    Raises
    ------
    ValueError
        If ``d`` is even or the data leave ``B(R)``.
    """
    if grid.d % 2 == 0:
        raise ValueError("strong Huygens principle needs odd d; use the local decay test in even d")
    g0 = np.zeros_like(np.asarray(f0)) if g0 is None else g0
    if support_radius(grid, f0, g0) > radius:
        raise ValueError("data are not supported in B(R)")
    if t < 2 * radius:
        logger.info("t=%g < 2R=%g: inside the light cone, no vanishing expected", t, 2 * radius)
    st = free_solution(grid, f0, g0, t, propagator)
    den = np.sqrt(grid.norm(f0) ** 2 + grid.norm(g0) ** 2)
    return grid.ball_norm(st.u, radius) / den


def dalembert_d3(f0: Callable, g0: Optional[Callable], r, t: float, fine: int = 200001):
    """Closed-form free wave in ``d = 3``, ``l = 0``.

    ``v = r u`` solves the 1-D wave equation on the half line with
    ``v(0) = 0``, so ``v(t, r) = (F(r+t) + F(r-t))/2 + (G(r+t) - G(r-t))/2``
    with ``F`` the odd extension of ``r f0`` and ``G`` a primitive of the odd
    extension of ``r g0``.
    """
    r = np.asarray(r, float)
    F = lambda s: np.sign(s) * np.abs(s) * f0(np.abs(s))
    v = 0.5 * (F(r + t) + F(r - t))
    if g0 is not None:
        s_max = float(np.max(np.abs(r)) + abs(t))
        s = np.linspace(-s_max, s_max, fine)
        W = np.sign(s) * np.abs(s) * g0(np.abs(s))
        G = cumulative_trapezoid(W, s, initial=0.0)
        v = v + 0.5 * (np.interp(r + t, s, G) - np.interp(r - t, s, G))
    return v / r


def local_decay_series(grid: SectorGrid, f0, g0, times, radius: float,
                       propagator: Optional[FreePropagator] = None) -> dict:
    """``||cos(t sqrt(-Delta)) f0||_{B(R)}`` and ``||sin(...)/sqrt(-Delta) g0||_{B(R)}`` over ``times``."""
    prop = propagator or FreePropagator(grid)
    supp = support_radius(grid, f0, g0)
    # a reflected wave re-enters B(R) after about 2 r_max - supp - R
    if max(times) >= 2 * grid.r_max - supp - radius:
        raise SupportError("time window reaches the reflection from r_max")
    cos_n = np.array([grid.ball_norm(prop.cos(t, f0), radius) for t in times])
    sin_n = np.array([grid.ball_norm(prop.sin(t, g0), radius) for t in times])
    return {"t": np.asarray(times, float), "cos": cos_n, "sin": sin_n}
