"""Numerical audit of the dilation generator as a conjugate operator.

For ``z`` in ``D_R^+`` the selfadjoint part of ``P(z)`` is

    P_R(z) = -Delta_G + a w Im z - w Re z^2,

and the commutator with the dilation generator ``A`` satisfies

    [P_R, iA] = 2 P_R + 2 Re z^2 + K(z),   K = K1 + K2,
    K1 = div(r g' grad) - Im z r (a w)' + Re z^2 r w',
    K2 = -2 Im z a w + 2 Re z^2 (w - 1).

Commutators are formed from the discrete ``B = iA`` as ``P_R B - B P_R``, so
the continuum identity is only recovered under refinement.  Norms in
``L(H^1_z, H^{-1}_z)`` use ``X = 1 - Delta/|z|^2``:
``||T|| = sqrt(lambda_max(X^{-1} T^* X^{-1} T))``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal, lapack

from .coefficients import CoefficientProfile
from .freewave import smooth_bump
from .norms import POWER_MAXITER, POWER_SEED, POWER_TOL, PowerIterationError, fit_loglog
from .radial import SectorGrid, SectorOperator, assemble_laplacian, assemble_multiplier, dilation_real_part
from .resolvent import ResolventEngine, in_region
from .scaling import CONSISTENT, INCONCLUSIVE, VIOLATION

logger = logging.getLogger(__name__)

ETA_MAX = 1.0 / 32
ETA_SCAN = (1.0 / 32, 1.0 / 64, 1.0 / 128)
RANGE_TOL = 1e-8
MARGIN_TOL = 0.05
UPSILON = 10.0
GROUP_TOL = 1e-3
INTERIOR = 0.9
H2_THETAS = (-1.0, -0.5, 0.5, 1.0)
PASS, FAIL, SKIPPED = "PASS", "FAIL", "SKIPPED"


def check_frequency(z: complex) -> complex:
    """Reject frequencies outside ``D_R^+`` (``|z| <= 1``, ``Im z > 0``, ``2 Re z >= |z|^2``)."""
    z = complex(z)
    if abs(z) > 1 or not in_region(z, "D_R_plus"):
        raise ValueError(f"z={z} is not in D_R^+")
    return z


# ---------------------------------------------------------------------------
# operators


def real_part(profile: CoefficientProfile, grid: SectorGrid, z: complex) -> SectorOperator:
    """``P_R(z) = -Delta_G + a w Im z - w Re z^2``."""
    z = complex(z)
    r = grid.r
    pot = profile.a(r) * profile.w(r) * z.imag - profile.w(r) * (z * z).real
    return -assemble_laplacian(profile, grid) + assemble_multiplier(pot, grid)


def k_operator(profile: CoefficientProfile, grid: SectorGrid, z: complex) -> SectorOperator:
    """``K(z) = K1(z) + K2(z)``."""
    z = complex(z)
    r = grid.r
    w, a = profile.w(r), profile.a(r)
    daw = profile.a(r, 1) * w + a * profile.w(r, 1)
    re2, im = (z * z).real, z.imag
    K1 = assemble_laplacian(lambda s: s * profile.g(s, 1), grid)
    diag = -im * r * daw + re2 * r * profile.w(r, 1) - 2 * im * a * w + 2 * re2 * (w - 1)
    return K1 + assemble_multiplier(diag, grid)


def commutator(T: SectorOperator, u) -> np.ndarray:
    """``[T, iA] u = T B u - B T u`` with the discrete ``B = iA``."""
    B = dilation_real_part(T.grid)
    return T @ (B @ u) - B @ (T @ u)


def default_test_vectors(grid: SectorGrid) -> list:
    """Smooth bumps supported in ``[r_max/8, r_max/2]``."""
    R = grid.r_max
    return [smooth_bump(grid.r, R / 16, c * R) for c in (0.2, 0.3, 0.4)]


def commutator_identity_residual(profile: CoefficientProfile, grid: SectorGrid, z: complex,
                                 vectors: Optional[Sequence[np.ndarray]] = None, norm: str = "energy") -> float:
    """Largest relative residual of ``[P_R, iA] = 2 P_R + 2 Re z^2 + K`` over test vectors.

    Parameters
    ----------
    vectors : sequence of ndarray, optional
        Must vanish near ``r = 0`` and ``r = r_max``; default
        :func:`default_test_vectors`.
    norm : {"energy", "l2"}
        ``"energy"`` measures ``||res||_{H^{-1}_z} / ||phi||_{H^1_z}``, the
        norms in which the identity holds between ``H^1_z`` and
        ``H^{-1}_z``; ``"l2"`` measures ``||res|| / ||phi||``.
    """
    z = check_frequency(z)
    if norm not in ("energy", "l2"):
        raise ValueError(f"unknown norm {norm!r}")
    PR = real_part(profile, grid, z)
    K = k_operator(profile, grid, z)
    scale = EnergyScale(grid, abs(z)) if norm == "energy" else None
    vectors = default_test_vectors(grid) if vectors is None else vectors
    out = 0.0
    for phi in vectors:
        res = commutator(PR, phi) - 2 * (PR @ phi) - 2 * (z * z).real * phi - K @ phi
        if scale is None:
            val = grid.norm(res) / grid.norm(phi)
        else:
            val = np.sqrt(grid.inner(scale.solve(res), res).real) / scale.norm(phi)
        out = max(out, float(val))
    return out


def commutator_refinement(profile: CoefficientProfile, z: complex, r_max: float = 40.0,
                          n_values: Sequence[int] = (512, 1024, 2048, 4096), ell: int = 0, norm: str = "energy"):
    """Residuals over a grid-refinement ladder and their order ``-d log res / d log n``.

    The test vectors are the same functions on each grid.
    """
    res = []
    for n in n_values:
        g = SectorGrid(profile.d, ell, r_max, n)
        res.append(commutator_identity_residual(profile, g, z, norm=norm))
    fit = fit_loglog(np.asarray(n_values, float), np.asarray(res))
    return np.asarray(res), -fit.slope


# ---------------------------------------------------------------------------
# H^1_z -> H^{-1}_z norms


class EnergyScale:
    """``X = 1 - Delta/|z|^2`` with a cached tridiagonal factorization."""

    def __init__(self, grid: SectorGrid, r: float):
        self.grid = grid
        self.r = float(r)
        self.X = assemble_multiplier(np.ones(grid.n), grid) - assemble_laplacian(None, grid).scale(1 / r**2)
        dl, d, du = self.X.tridiagonal()
        *self._lu, info = lapack.dgttrf(dl, d, du)
        if info != 0:  # pragma: no cover
            raise ValueError("X is singular")

    def solve(self, v):
        v = np.asarray(v)
        if np.iscomplexobj(v):
            return self.solve(v.real) + 1j * self.solve(v.imag)
        x, info = lapack.dgttrs(*self._lu, v)
        return x

    def norm(self, u) -> float:
        """``||u||_{H^1_z} = <X u, u>^{1/2}``."""
        return float(np.sqrt(self.grid.inner(self.X @ u, u).real))


def dual_norm(apply, apply_adjoint, scale: EnergyScale, tol: float = POWER_TOL, maxiter: int = POWER_MAXITER,
              seed: int = POWER_SEED) -> float:
    """``||T||_{L(H^1_z, H^{-1}_z)}`` by power iteration on ``X^{-1} T^* X^{-1} T``."""
    g = scale.grid
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(g.n) + 1j * rng.standard_normal(g.n)
    x /= scale.norm(x)
    est, hist = 0.0, []
    for it in range(1, maxiter + 1):
        y = scale.solve(apply(x))
        m = scale.solve(apply_adjoint(y))
        # Rayleigh quotient in the X inner product: <X M x, x> / <X x, x> = ||S^{-1} T x||^2
        new = float(np.sqrt(max(g.inner(apply(x), y).real, 0.0)))
        hist.append(new)
        if it > 1 and abs(new - est) <= tol * new:
            return new
        est = new
        nm = scale.norm(m)
        if nm == 0:
            return 0.0
        x = m / nm
    raise PowerIterationError(f"dual-norm iteration did not converge (last {hist[-3:]})", hist)


def k_bound(profile: CoefficientProfile, grid: SectorGrid, z: complex, rho: Optional[float] = None) -> float:
    """``||K(z) <z x>^rho||_{L(H^1_z, H^{-1}_z)} / |z|^2`` (default ``rho = rho0/2``)."""
    z = check_frequency(z)
    rho = profile.rho0 / 2 if rho is None else rho
    K = k_operator(profile, grid, z)
    wt = (1 + (abs(z) * grid.r) ** 2) ** (rho / 2)
    scale = EnergyScale(grid, abs(z))
    val = dual_norm(lambda u: K @ (wt * u), lambda u: wt * (K @ u), scale)
    return val / abs(z) ** 2


# ---------------------------------------------------------------------------
# spectral cutoff and positivity


def cutoff(x):
    """Smooth even cutoff: 1 on ``[-1, 1]``, 0 outside ``]-2, 2[``.

    Built from ``psi(t) = exp(-1/t)`` as ``psi(2-|x|) / (psi(2-|x|) + psi(|x|-1))``.
    """
    x = np.abs(np.asarray(x, float))
    psi = lambda t: np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    a, b = psi(2 - x), psi(x - 1)
    out = np.zeros_like(x)
    m = (a + b) > 0
    out[m] = a[m] / (a[m] + b[m])
    return out


def symmetric_tridiagonal(T: SectorOperator):
    """Diagonals of ``Q^{1/2} T Q^{-1/2}`` for a tridiagonal ``T`` selfadjoint in the measure."""
    sq = np.sqrt(T.grid.q)
    sub, main, sup = T.tridiagonal()
    off = sup * sq[:-1] / sq[1:]
    if not np.allclose(off, sub * sq[1:] / sq[:-1], rtol=1e-10, atol=0):
        raise ValueError("operator is not selfadjoint in the measure")
    return main.real, off.real


@dataclass
class MourreAudit:
    """Projected positivity at one frequency and cutoff width."""

    z: complex
    eta: float
    commutator_residual: float
    positivity_margin: float
    range_dim: int
    K_bound: float = float("nan")
    status: str = CONSISTENT
    extra: dict = field(default_factory=dict)

    @property
    def relative_margin(self) -> float:
        return self.positivity_margin / abs(self.z) ** 2

    def to_dict(self) -> dict:
        return {"z": [self.z.real, self.z.imag], "eta": self.eta,
                "commutator_residual": self.commutator_residual,
                "positivity_margin": self.positivity_margin, "relative_margin": self.relative_margin,
                "range_dim": self.range_dim, "K_bound": self.K_bound, "status": self.status, **self.extra}


def cutoff_eigenpairs(profile: CoefficientProfile, grid: SectorGrid, z: complex, eta: float):
    """Eigenpairs of ``P_R(z)/|z|^2`` with ``|mu| < 2 eta`` (orthonormal in the measure)."""
    PR = real_part(profile, grid, z)
    d, e = symmetric_tridiagonal(PR)
    s = abs(z) ** 2
    lo, hi = -2 * eta * s, 2 * eta * s
    mu, V = eigh_tridiagonal(d, e, select="v", select_range=(lo, hi))
    V = V / np.sqrt(grid.q)[:, None]
    return mu / s, V, PR


def wall_flux(profile: CoefficientProfile, grid: SectorGrid, V: np.ndarray) -> np.ndarray:
    """Gram matrix of the boundary form ``R^d g(R) u'(R) conj(v'(R))`` with ``u'(R) = -u_n/h``.

    On a Dirichlet box ``<[-Delta_G, iA] u, u> = 2 <-Delta_G u, u> - R^d g(R) |u'(R)|^2``
    (a Rellich-Pohozaev identity), so the discrete commutator has zero
    expectation in every eigenvector.  Adding this form back gives the
    whole-space commutator on the box eigenvectors.
    """
    R = grid.r_max
    c = R**grid.d * float(profile.g(np.array([R]))[0]) / grid.h**2
    end = V[-1]
    return c * np.outer(np.conj(end), end).real


def mourre_positivity(profile: CoefficientProfile, grid: SectorGrid, z: complex, eta: float = ETA_MAX,
                      tol: float = MARGIN_TOL, wall: bool = True) -> MourreAudit:
    """Smallest eigenvalue of ``Pi [P_R, iA] Pi - |z|^2/2 Pi^2`` on the range of ``Pi``.

    ``Pi = phi(P_R/(eta |z|^2))``; only eigenvectors with ``phi > 1e-8`` span
    the range.  With ``wall=True`` the boundary flux of :func:`wall_flux`
    is added to the discrete commutator (the raw margin is kept in
    ``extra["raw_margin"]``).  An empty range gives an INCONCLUSIVE audit.
    The margin is VIOLATION when below ``-tol |z|^2``.
    """
    z = check_frequency(z)
    if not 0 < eta <= ETA_MAX:
        raise ValueError(f"eta must lie in ]0, 1/32], got {eta}")
    mu, V, PR = cutoff_eigenpairs(profile, grid, z, eta)
    phi = cutoff(mu / eta)
    keep = phi > RANGE_TOL
    res = commutator_identity_residual(profile, grid, z)
    if not np.any(keep):
        return MourreAudit(z, eta, res, float("nan"), 0, status=INCONCLUSIVE,
                           extra={"reason": "no spectrum of P_R/|z|^2 in the cutoff window"})
    V, phi, mu = V[:, keep], phi[keep], mu[keep]
    CV = np.column_stack([commutator(PR, v) for v in V.T])
    C = V.T @ (grid.q[:, None] * CV)
    C = 0.5 * (C + C.T)
    half = 0.5 * abs(z) ** 2 * np.diag(phi**2)
    raw = float(np.linalg.eigvalsh(phi[:, None] * C * phi[None, :] - half)[0])
    if wall:
        C = C + wall_flux(profile, grid, V)
    margin = float(np.linalg.eigvalsh(phi[:, None] * C * phi[None, :] - half)[0])
    status = CONSISTENT if margin >= -tol * abs(z) ** 2 else VIOLATION
    return MourreAudit(z, eta, res, margin, int(keep.sum()), status=status,
                       extra={"mu_min": float(mu.min()), "mu_max": float(mu.max()), "raw_margin": raw,
                              "wall": wall})


def eta_scan(profile: CoefficientProfile, grid: SectorGrid, z: complex, etas: Sequence[float] = ETA_SCAN,
             tol: float = MARGIN_TOL, wall: bool = True) -> tuple:
    """Audits for each ``eta``; returns ``(best, audits)`` with the largest relative margin."""
    audits = [mourre_positivity(profile, grid, z, eta, tol, wall) for eta in etas]
    ok = [a for a in audits if a.range_dim > 0]
    best = max(ok, key=lambda a: a.positivity_margin / abs(z) ** 2) if ok else audits[0]
    return best, audits


def mourre_grid(profile: CoefficientProfile, z: complex, kappa: float = 120.0, h: float = 0.25,
                ell: int = 0) -> SectorGrid:
    """Grid with ``r_max = kappa/|z|``: the window ``|mu| < 2 eta`` then holds
    about ``sqrt(2 eta) kappa / pi`` eigenvalues of the free part."""
    r_max = kappa / abs(z)
    return SectorGrid(profile.d, ell, r_max, int(round(r_max / h)) - 1)


# ---------------------------------------------------------------------------
# hypotheses


def interior_space(grid: SectorGrid, fraction: float = INTERIOR):
    """Functions on ``grid`` supported in ``r <= fraction * r_max``.

    Returns ``(sub, lift, cut)``: a grid with the same step on the first
    ``k`` nodes, zero extension to ``grid`` and restriction to ``sub``.  The
    ``H^1_z`` form compressed to those nodes is the one of ``sub``.
    """
    k = int(np.searchsorted(grid.r, fraction * grid.r_max, side="right"))
    sub = SectorGrid(grid.d, grid.ell, (k + 1) * grid.h, k)

    def lift(u):
        out = np.zeros(grid.n, dtype=np.result_type(u, float))
        out[:k] = u
        return out

    return sub, lift, lambda u: np.asarray(u)[:k]


def dilate(grid: SectorGrid, u, theta: float) -> np.ndarray:
    """``(e^{i theta A} u)(r) = e^{d theta/2} u(e^theta r)``, zero beyond ``r_max``.

    Cubic-spline interpolation on the even extension of ``u``.
    """
    r = grid.r
    rr = np.concatenate([-r[::-1], r, [grid.r_max]])
    uu = np.concatenate([u[::-1], u, [0.0]])
    spl = CubicSpline(rr, uu)
    s = np.exp(theta) * r
    out = np.where(s < grid.r_max, spl(np.minimum(s, grid.r_max)), 0.0)
    return np.exp(grid.d * theta / 2) * out


@dataclass
class HypothesisItem:
    name: str
    status: str
    value: float = float("nan")
    bound: float = float("nan")
    note: str = ""


@dataclass
class HypothesisReport:
    z: complex
    items: list

    def __getitem__(self, name) -> HypothesisItem:
        for it in self.items:
            if it.name == name:
                return it
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(it.status != FAIL for it in self.items)

    def to_dict(self) -> dict:
        return {"z": [self.z.real, self.z.imag],
                "items": [{"name": i.name, "status": i.status, "value": i.value, "bound": i.bound,
                           "note": i.note} for i in self.items]}


def hypothesis_report(profile: CoefficientProfile, grid: SectorGrid, z: complex, upsilon: float = UPSILON,
                      etas: Sequence[float] = ETA_SCAN, test_vectors: Optional[Sequence[np.ndarray]] = None
                      ) -> HypothesisReport:
    """Measure the checkable conjugate-operator hypotheses for ``Q_z = P(z)/|z|^2``.

    Items: ``H1`` (``L2`` below ``H^1_z``), ``H2`` (dilations bounded by
    ``e`` on ``H^1_z`` and the group law), ``H3a`` (``||Q_z|| <= Upsilon``),
    ``H3b`` (``||ad_A Q_z|| <= Upsilon``), ``H4`` (dissipative ``Q_perp``,
    nonnegative ``Q_perp^+``, ``||(1 - Pi) Q_perp^{-1}||_{L2} <= 1/eta``),
    ``H5`` (projected positivity).  Higher commutators are SKIPPED.
    """
    z = check_frequency(z)
    s = abs(z) ** 2
    scale = EnergyScale(grid, abs(z))
    items = []
    vecs = default_test_vectors(grid) if test_vectors is None else test_vectors

    # H1: the multiplier of X is >= 1
    ratio = max(grid.norm(v) / scale.norm(v) for v in vecs)
    items.append(HypothesisItem("H1", PASS if ratio <= upsilon else FAIL, ratio, upsilon))

    # H2
    worst, group = 0.0, 0.0
    for v in vecs:
        outer = grid.r[np.nonzero(np.abs(v) > 0)[0][-1]]
        for th in H2_THETAS:
            if outer * np.exp(-th) >= grid.r_max:
                continue  # the dilated vector would leave the box
            worst = max(worst, scale.norm(dilate(grid, v, th)) / scale.norm(v))
            back = dilate(grid, dilate(grid, v, th), -th)
            group = max(group, grid.norm(back - v) / grid.norm(v))
    ok = worst <= np.e and group <= GROUP_TOL
    items.append(HypothesisItem("H2", PASS if ok else FAIL, worst, float(np.e),
                                f"group-law residual {group:.2e}"))

    # H3a and H3b
    # norms over functions supported in r <= INTERIOR * r_max, away from the wall term
    sub, lift, cut = interior_space(grid)
    sub_scale = EnergyScale(sub, abs(z))
    eng = ResolventEngine(profile, grid)
    P = eng.pz(z)
    Pa = P.adjoint()
    q3a = dual_norm(lambda u: cut(P @ lift(u)) / s, lambda u: cut(Pa @ lift(u)) / s, sub_scale)
    items.append(HypothesisItem("H3a", PASS if q3a <= upsilon else FAIL, q3a, upsilon))
    # ad_A(Q) = [Q, A] = -i [Q, B]; its adjoint is i [Q^*, B] since B^* = -B
    adq = lambda u: -1j * cut(commutator(P, lift(u))) / s
    adq_adj = lambda u: 1j * cut(commutator(Pa, lift(u))) / s
    q3b = dual_norm(adq, adq_adj, sub_scale)
    items.append(HypothesisItem("H3b", PASS if q3b <= upsilon else FAIL, q3b, upsilon))
    items.append(HypothesisItem("H3c", SKIPPED, note="commutators of order >= 2 are not audited"))

    # H4
    r = grid.r
    w, a = profile.w(r), profile.a(r)
    wmin = min(profile.w_min, float(w.min()))
    z2 = z * z
    qpp = (z2.imag * (w - wmin) + z.real * a * w) / s
    dissipative = z2.imag * wmin >= 0
    PR = real_part(profile, grid, z)
    dd, ee = symmetric_tridiagonal(PR)
    mu = eigh_tridiagonal(dd, ee, eigvals_only=True) / s
    c = z2.imag * wmin / s
    eta = min(etas)
    rperp = float(np.max(np.abs(1 - cutoff(mu / eta)) / np.abs(mu - 1j * c)))
    ok = dissipative and qpp.min() >= -1e-14 and rperp <= 1 / eta + 1e-12
    items.append(HypothesisItem("H4", PASS if ok else FAIL, float(qpp.min()), 0.0,
                                f"||(1-Pi) R_perp||_L2 = {rperp:.3g} <= 1/eta = {1 / eta:.3g}"))

    # H5
    best, _ = eta_scan(profile, grid, z, etas)
    st = {CONSISTENT: PASS, VIOLATION: FAIL, INCONCLUSIVE: SKIPPED}[best.status]
    items.append(HypothesisItem("H5", st, best.relative_margin, -MARGIN_TOL,
                                f"eta={best.eta:.4g}, range dim {best.range_dim}"))
    return HypothesisReport(z, items)
