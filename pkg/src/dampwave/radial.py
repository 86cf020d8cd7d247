"""Radial sector discretization.

Functions on R^d of the form ``u(|x|) Y_l(x/|x|)`` are represented on the
uniform grid ``r_j = j h`` (``j = 1..n``, ``h = r_max/(n+1)``) with the
quadrature weights ``q_j = r_j^{d-1} h``.  All operators are stored as banded
matrices and are compared in the weighted inner product
``<u, v> = sum_j q_j u_j conj(v_j)``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import sparse
from scipy.linalg import eigh_tridiagonal

from .coefficients import CoefficientProfile, japanese

MAX_BAND = 2
SELFADJOINT = "selfadjoint"
GENERAL = "general"


@dataclass(frozen=True)
class SectorGrid:
    """Uniform radial grid for the spherical-harmonic sector ``ell``."""

    d: int
    ell: int
    r_max: float
    n: int

    def __post_init__(self):
        if self.d < 1 or self.ell < 0 or self.n < 3 or self.r_max <= 0:
            raise ValueError(f"invalid grid {self}")

    @property
    def h(self) -> float:
        return self.r_max / (self.n + 1)

    @functools.cached_property
    def r(self) -> np.ndarray:
        return self.h * np.arange(1, self.n + 1)

    @functools.cached_property
    def q(self) -> np.ndarray:
        return self.r ** (self.d - 1) * self.h

    @functools.cached_property
    def faces(self) -> np.ndarray:
        """Face radii ``r_{j+1/2}`` for ``j = 0..n``."""
        return self.h * (np.arange(self.n + 1) + 0.5)

    @functools.cached_property
    def beta(self) -> np.ndarray:
        """``d`` times the discrete volume inside each face, ``j = 0..n``."""
        return self.d * np.concatenate([[0.0], np.cumsum(self.q)])

    @property
    def centrifugal(self) -> float:
        return float(self.ell * (self.ell + self.d - 2))

    def with_ell(self, ell: int) -> "SectorGrid":
        return SectorGrid(self.d, ell, self.r_max, self.n)

    def inner(self, u, v) -> complex:
        return complex(np.sum(self.q * u * np.conj(v)))

    def norm(self, u) -> float:
        return float(np.sqrt(np.sum(self.q * np.abs(u) ** 2)))

    def ball_norm(self, u, radius: float) -> float:
        """L2 norm restricted to ``r <= radius``."""
        m = self.r <= radius
        return float(np.sqrt(np.sum(self.q[m] * np.abs(u[m]) ** 2)))


class SectorOperator:
    """Banded operator on a sector grid.

    ``diags[k + MAX_BAND][j]`` holds the entry ``T[j, j + k]``; entries that
    fall outside the matrix are zero.
    """

    def __init__(self, grid: SectorGrid, diags: np.ndarray, symmetry: str = GENERAL):
        diags = np.asarray(diags)
        if diags.shape != (2 * MAX_BAND + 1, grid.n):
            raise ValueError("band array has the wrong shape")
        self.grid = grid
        self.diags = diags
        self.symmetry = symmetry

    @classmethod
    def from_bands(cls, grid, bands: dict, symmetry=GENERAL, dtype=float):
        """Build from ``{offset: row-aligned array}``."""
        dt = np.result_type(dtype, *[np.asarray(b).dtype for b in bands.values()])
        D = np.zeros((2 * MAX_BAND + 1, grid.n), dtype=dt)
        for k, b in bands.items():
            if abs(k) > MAX_BAND:
                raise ValueError("operators are at most pentadiagonal")
            D[k + MAX_BAND] = b
        cls._mask(D)
        return cls(grid, D, symmetry)

    @staticmethod
    def _mask(D):
        n = D.shape[1]
        for k in range(1, MAX_BAND + 1):
            D[MAX_BAND + k, n - k:] = 0
            D[MAX_BAND - k, :k] = 0

    def band(self, k: int) -> np.ndarray:
        return self.diags[k + MAX_BAND]

    @property
    def bandwidth(self) -> int:
        nz = [k for k in range(-MAX_BAND, MAX_BAND + 1) if np.any(self.band(k))]
        return max((abs(k) for k in nz), default=0)

    def __matmul__(self, u):
        u = np.asarray(u)
        n = self.grid.n
        y = self.band(0) * u
        for k in range(1, MAX_BAND + 1):
            y = y + np.concatenate([self.band(k)[: n - k] * u[k:], np.zeros(k)])
            y = y + np.concatenate([np.zeros(k), self.band(-k)[k:] * u[: n - k]])
        return y

    def _combine(self, other, fn):
        if isinstance(other, SectorOperator):
            sym = SELFADJOINT if self.symmetry == other.symmetry == SELFADJOINT else GENERAL
            return SectorOperator(self.grid, fn(self.diags, other.diags), sym)
        return NotImplemented

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __neg__(self):
        return SectorOperator(self.grid, -self.diags, self.symmetry)

    def scale(self, c) -> "SectorOperator":
        sym = self.symmetry if np.isreal(c) else GENERAL
        return SectorOperator(self.grid, c * self.diags, sym)

    def __mul__(self, c):
        return self.scale(c)

    __rmul__ = __mul__

    def left_multiply(self, m) -> "SectorOperator":
        """Return ``diag(m) T``."""
        return SectorOperator(self.grid, self.diags * np.asarray(m)[None, :], GENERAL)

    def right_multiply(self, m) -> "SectorOperator":
        """Return ``T diag(m)``."""
        m = np.asarray(m)
        D = np.array(self.diags, dtype=np.result_type(self.diags, m))
        n = self.grid.n
        for k in range(-MAX_BAND, MAX_BAND + 1):
            idx = np.clip(np.arange(n) + k, 0, n - 1)
            D[k + MAX_BAND] *= m[idx]
        self._mask(D)
        return SectorOperator(self.grid, D, GENERAL)

    def adjoint(self) -> "SectorOperator":
        """Adjoint in the weighted inner product, ``Q^{-1} T^H Q``."""
        q = self.grid.q
        n = self.grid.n
        D = np.zeros_like(self.diags)
        for k in range(-MAX_BAND, MAX_BAND + 1):
            src = self.band(-k)
            j = np.arange(n)
            jk = j + k
            ok = (jk >= 0) & (jk < n)
            D[k + MAX_BAND, ok] = np.conj(src[jk[ok]]) * q[jk[ok]] / q[j[ok]]
        return SectorOperator(self.grid, D, self.symmetry)

    def to_sparse(self):
        n = self.grid.n
        data, offs = [], []
        for k in range(-MAX_BAND, MAX_BAND + 1):
            b = self.band(k)
            data.append(b[: n - k] if k >= 0 else b[-k:])
            offs.append(k)
        return sparse.diags(data, offs, shape=(n, n), format="csr")

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def tridiagonal(self):
        """Return ``(sub, main, super)`` diagonals; requires bandwidth <= 1."""
        if self.bandwidth > 1:
            raise ValueError("operator is not tridiagonal")
        return self.band(-1)[1:], self.band(0), self.band(1)[:-1]


def _radial_fn_values(fn, r):
    return np.asarray(fn(r), dtype=float) if callable(fn) else np.broadcast_to(np.asarray(fn, dtype=float), r.shape)


def assemble_laplacian(profile: Union[CoefficientProfile, Callable, None], grid: SectorGrid) -> SectorOperator:
    """Assemble the sector operator ``Delta_G = div g grad``.

    The conservative three-point scheme uses the face coefficients
    ``beta_{j+1/2}/r_{j+1/2}`` (``beta`` is ``d`` times the discrete ball
    volume), which are exact on ``r^2`` and vanish at the origin face, so no
    ghost value is needed there.  Dirichlet conditions hold at ``r_max``.

    Parameters
    ----------
    profile : CoefficientProfile, callable or None
        Source of the metric ``g``; ``None`` gives the flat Laplacian and a
        callable ``g(r)`` is used directly.
    grid : SectorGrid

    Returns
    -------
    SectorOperator
        Tagged selfadjoint in the weighted inner product.
    """
    if profile is None:
        gfun = lambda r: np.ones_like(r)
    elif isinstance(profile, CoefficientProfile):
        gfun = profile.g
    else:
        gfun = profile
    h, q, r = grid.h, grid.q, grid.r
    flux = _radial_fn_values(gfun, grid.faces) * grid.beta / grid.faces / h  # j = 0..n
    upper = flux[1:] / q
    lower = flux[:-1] / q
    main = -(flux[1:] + flux[:-1]) / q - _radial_fn_values(gfun, r) * grid.centrifugal / r**2
    bands = {0: main, 1: upper, -1: lower}
    return SectorOperator.from_bands(grid, bands, SELFADJOINT)


def assemble_multiplier(fn, grid: SectorGrid) -> SectorOperator:
    """Diagonal operator with entries ``fn(r_j)`` (or the given array)."""
    vals = np.asarray(fn(grid.r)) if callable(fn) else np.broadcast_to(np.asarray(fn), (grid.n,)).copy()
    sym = SELFADJOINT if np.isrealobj(vals) else GENERAL
    return SectorOperator.from_bands(grid, {0: vals}, sym, dtype=vals.dtype)


def weight(grid: SectorGrid, delta: float) -> np.ndarray:
    """Node values of ``<r>^{-delta}``."""
    return japanese(grid.r) ** (-delta)


def assemble_dilation_generator(grid: SectorGrid) -> SectorOperator:
    """Assemble ``A = -i (d/2 + r d_r)``.

    The discrete form is ``A = -i B`` with
    ``(B u)_j = (beta_{j+1/2} u_{j+1} - beta_{j-1/2} u_{j-1}) / (2 q_j)``;
    ``diag(q) B`` is antisymmetric, so ``A`` is selfadjoint in the weighted
    inner product.
    """
    b = grid.beta
    upper = b[1:] / (2 * grid.q)
    lower = -b[:-1] / (2 * grid.q)
    return SectorOperator.from_bands(grid, {1: -1j * upper, -1: -1j * lower}, SELFADJOINT, dtype=complex)


def dilation_real_part(grid: SectorGrid) -> SectorOperator:
    """The real matrix ``B = i A``."""
    b = grid.beta
    return SectorOperator.from_bands(grid, {1: b[1:] / (2 * grid.q), -1: -b[:-1] / (2 * grid.q)})


def radial_derivative(grid: SectorGrid) -> SectorOperator:
    """Centered difference ``d_r`` with zero values outside the grid."""
    n, h = grid.n, grid.h
    return SectorOperator.from_bands(grid, {1: np.full(n, 0.5 / h), -1: np.full(n, -0.5 / h)})


@dataclass
class FreeSpectrum:
    """Eigenpairs of the flat sector operator ``-Delta``.

    ``vectors`` are Euclidean-orthonormal eigenvectors of the symmetrized
    matrix ``Q^{1/2} (-Delta) Q^{-1/2}``; the measure-orthonormal
    eigenfunctions are ``Q^{-1/2} vectors``.
    """

    grid: SectorGrid
    values: np.ndarray
    vectors: np.ndarray

    def analyze(self, u):
        """Expansion coefficients ``<u, e_k>``."""
        return self.vectors.T @ (np.sqrt(self.grid.q) * u)

    def synthesize(self, c):
        return (self.vectors @ c) / np.sqrt(self.grid.q)

    def apply_function(self, fvals, u):
        """Apply ``f(-Delta)`` given the values ``f(lambda_k)``."""
        return self.synthesize(fvals * self.analyze(u))


@functools.lru_cache(maxsize=4)
def free_spectrum(grid: SectorGrid) -> FreeSpectrum:
    """Eigendecomposition of the flat sector Laplacian (cached per grid)."""
    L = assemble_laplacian(None, grid)
    sq = np.sqrt(grid.q)
    main = -L.band(0)
    off = -L.band(1)[:-1] * sq[:-1] / sq[1:]
    try:
        lam, V = eigh_tridiagonal(main, off)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise RuntimeError(f"free sector eigensolver failed: {exc}") from exc
    return FreeSpectrum(grid, np.maximum(lam, 0.0), V)


class SobolevScale:
    """The scale ``H_r^s`` with norm ``||<D_r>^s u||``, ``D_r = sqrt(-Delta)/r``."""

    def __init__(self, grid: SectorGrid, r: float, spectrum: FreeSpectrum | None = None):
        if not r > 0:
            raise ValueError("frequency scale must be positive")
        self.grid = grid
        self.r = float(r)
        self.spectrum = spectrum or free_spectrum(grid)
        self._base = 1.0 + self.spectrum.values / self.r**2

    @property
    def eigenvalues(self):
        return self.spectrum.values

    def multiplier(self, s: float) -> np.ndarray:
        return self._base ** (s / 2)

    def apply(self, s: float, u):
        if s == 0:
            return np.array(u, copy=True)
        return self.spectrum.apply_function(self.multiplier(s), u)

    def norm(self, s: float, u) -> float:
        c = self.spectrum.analyze(u)
        return float(np.linalg.norm(self.multiplier(s) * c))


def sobolev_scale(grid: SectorGrid, r: float) -> SobolevScale:
    """Build the ``H_r^s`` scale on ``grid``."""
    return SobolevScale(grid, r)
