"""Resolvents of the damped wave operator and their product calculus.

For ``Im z > 0`` the sector operators are

    P(z)  = -Delta_G - i z a w - z^2 w,      R(z)  = P(z)^{-1},
    P0(z) = -Delta - z^2,                    R0(z) = P0(z)^{-1}.

Products such as ``R(z') gamma_{j1}(z) R(z') ... gamma_{jk}(z) R(z')`` are
described symbolically by :class:`ResolventProduct` and evaluated
matrix-free, right to left, with one tridiagonal LU per frequency.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Union

import numpy as np
from scipy.linalg import lapack

from .coefficients import CoefficientProfile
from .norms import POWER_MAXITER, POWER_SEED, POWER_TOL, power_norm
from .radial import (SectorGrid, SectorOperator, assemble_laplacian, weight)

logger = logging.getLogger(__name__)

PERTURBED_SLOTS = ("z", "ir")
FREE_SLOTS = ("z0", "ir0")
SLOTS = PERTURBED_SLOTS + FREE_SLOTS
GAMMAS = ("gamma0", "gamma1", "gamma2")
FREE_GAMMAS = ("gamma0_free", "gamma1_free", "gamma2_free")
THETAS = ("theta0", "theta1", "theta2")
FACTOR_KINDS = GAMMAS + FREE_GAMMAS + THETAS
MAX_DERIVATIVE = 6
SOLVE_RTOL = 1e-10
CAP_FRACTION = 0.15


class SolverError(RuntimeError):
    """Singular or inaccurate factorization (near-resonance of the truncation)."""


# ---------------------------------------------------------------------------
# frequencies


def region(z: complex) -> str:
    """Region tag of a frequency in the upper half-plane.

    ``"D_I"`` when ``arg z`` lies in ``[pi/6, 5 pi/6]``, otherwise
    ``"D_R_plus"``/``"D_R_minus"`` when ``+-2 Re z >= |z|^2``, else
    ``"other"``.
    """
    z = complex(z)
    phi = np.angle(z)
    if np.pi / 6 <= phi <= 5 * np.pi / 6:
        return "D_I"
    if 2 * z.real >= abs(z) ** 2:
        return "D_R_plus"
    if -2 * z.real >= abs(z) ** 2:
        return "D_R_minus"
    return "other"


def in_region(z: complex, tag: str) -> bool:
    """Membership test; ``D_I`` and ``D_R`` overlap, so both are checked."""
    z = complex(z)
    if tag == "D_I":
        return np.pi / 6 <= np.angle(z) <= 5 * np.pi / 6
    if tag == "D_R_plus":
        return z.imag > 0 and 2 * z.real >= abs(z) ** 2
    if tag == "D_R_minus":
        return z.imag > 0 and -2 * z.real >= abs(z) ** 2
    raise ValueError(tag)


@dataclass(frozen=True)
class FrequencyPoint:
    z: complex

    def __post_init__(self):
        if not complex(self.z).imag > 0:
            raise ValueError("frequency must lie in the open upper half-plane")

    @property
    def r(self) -> float:
        return abs(self.z)

    @property
    def region_tag(self) -> str:
        return region(self.z)


# ---------------------------------------------------------------------------
# symbolic products


def factor_index(kind: str) -> int:
    if kind not in FACTOR_KINDS:
        raise ValueError(f"unknown factor kind {kind!r}")
    return int(kind[5])


@dataclass(frozen=True)
class ResolventProduct:
    """Symbolic product ``S_0 F_1 S_1 ... F_k S_k``.

    ``slots`` are resolvent kinds (``"z"``, ``"ir"`` perturbed, ``"z0"``,
    ``"ir0"`` free) and ``factors`` the inserted multipliers.  A ``theta``
    factor bridges a perturbed left part and a free right part.
    """

    slots: tuple
    factors: tuple = ()

    def __post_init__(self):
        if len(self.slots) != len(self.factors) + 1:
            raise ValueError("a product with k factors has k + 1 resolvent slots")
        for s in self.slots:
            if s not in SLOTS:
                raise ValueError(f"unknown slot {s!r}")
        thetas = [i for i, f in enumerate(self.factors) if f in THETAS]
        if len(thetas) > 1:
            raise ValueError("at most one theta bridge per product")
        for i, f in enumerate(self.factors):
            left, right = self.slots[i], self.slots[i + 1]
            if f in GAMMAS:
                ok = left in PERTURBED_SLOTS and right in PERTURBED_SLOTS
            elif f in FREE_GAMMAS:
                ok = left in FREE_SLOTS and right in FREE_SLOTS
            else:
                ok = left in PERTURBED_SLOTS and right in FREE_SLOTS
            if not ok:
                raise ValueError(f"factor {f} cannot sit between slots {left} and {right}")
        if not thetas:
            kinds = {s in FREE_SLOTS for s in self.slots}
            if len(kinds) > 1:
                raise ValueError("free and perturbed slots need a theta bridge")

    @property
    def k(self) -> int:
        return len(self.factors)

    @property
    def indices(self) -> tuple:
        return tuple(factor_index(f) for f in self.factors)

    @property
    def m(self) -> int:
        """Exponent budget ``2 (k + 1) - |j|`` summed over all pieces."""
        return 2 * len(self.slots) - sum(self.indices)

    @property
    def sigma(self) -> Optional[int]:
        for f in self.factors:
            if f in THETAS:
                return factor_index(f)
        return None

    def __add__(self, other: "ResolventProduct") -> "ResolventProduct":
        raise TypeError("use concat() with an explicit joining factor")

    def concat(self, factor: str, other: "ResolventProduct") -> "ResolventProduct":
        return ResolventProduct(self.slots + other.slots, self.factors + (factor,) + other.factors)

    def adjoint_chain(self):
        """Chain elements in application order of the adjoint."""
        return list(zip(self.slots, (None,) + self.factors))

    def __str__(self):
        names = {"z": "R(z)", "ir": "R(ir)", "z0": "R0(z)", "ir0": "R0(ir)"}
        parts = [names[self.slots[0]]]
        for f, s in zip(self.factors, self.slots[1:]):
            parts += [f, names[s]]
        return " ".join(parts)


def resolvent(free: bool = False, at: str = "z") -> ResolventProduct:
    slot = at + ("0" if free else "")
    return ResolventProduct((slot,))


def chain(indices: Iterable[int], free: bool = False, slot: str = "z") -> ResolventProduct:
    """``R_{k, j}`` with all slots equal to ``slot``."""
    indices = tuple(indices)
    kind = FREE_GAMMAS if free else GAMMAS
    s = slot + ("0" if free and not slot.endswith("0") else "")
    return ResolventProduct((s,) * (len(indices) + 1), tuple(kind[j] for j in indices))


def _differentiate(terms: Counter, free: bool) -> Counter:
    g0, g1 = ("gamma0_free", "gamma1_free") if free else ("gamma0", "gamma1")
    out: Counter = Counter()
    for prod, c in terms.items():
        slots, facs = prod.slots, prod.factors
        for i in range(len(slots)):
            # d R = R gamma1 R
            new = ResolventProduct(slots[: i + 1] + slots[i:], facs[:i] + (g1,) + facs[i:])
            out[new] += c
        for i, f in enumerate(facs):
            if f == g1:
                out[ResolventProduct(slots, facs[:i] + (g0,) + facs[i + 1:])] += c
            elif f != g0:
                raise ValueError("only gamma0/gamma1 chains are differentiated")
    return out


def derivative_terms(n: int, free: bool = False) -> Counter:
    """Symbolic expansion of the n-th z-derivative of ``R`` (or ``R0``).

    Returns
    -------
    Counter
        Maps each :class:`ResolventProduct` to its integer multiplicity.
        Every product has exponent budget ``m = n + 2``.
    """
    if not 0 <= n <= MAX_DERIVATIVE:
        raise ValueError(f"derivative order must lie in 0..{MAX_DERIVATIVE}")
    terms = Counter({resolvent(free): 1})
    for _ in range(n):
        terms = _differentiate(terms, free)
    return terms


def difference_terms(n: int) -> Counter:
    """Expansion of ``R^{(n)} - R0^{(n)}`` through ``R - R0 = R theta R0``.

    Leibniz' rule with ``theta^{(b)} = theta_{2-b}`` gives theta-bridged
    products, each with budget ``m = n + 2``.
    """
    out: Counter = Counter()
    for a in range(n + 1):
        for b in range(min(2, n - a) + 1):
            c = n - a - b
            mult = math.factorial(n) // (math.factorial(a) * math.factorial(b) * math.factorial(c))
            left, right = derivative_terms(a), derivative_terms(c, free=True)
            for pl, cl in left.items():
                for pr, cr in right.items():
                    out[pl.concat(THETAS[2 - b], pr)] += mult * cl * cr
    return out


def split_form2(prod: ResolventProduct):
    """Split ``R_{N,j1}(ir,z) gamma_l R_{k2,j2}(z)`` into its pieces."""
    n_ir = 0
    while n_ir < len(prod.slots) and prod.slots[n_ir] == "ir":
        n_ir += 1
    if n_ir == 0 or n_ir == len(prod.slots):
        raise ValueError("not a mixed ir/z product")
    left = ResolventProduct(prod.slots[:n_ir], prod.factors[: n_ir - 1])
    right = ResolventProduct(prod.slots[n_ir:], prod.factors[n_ir:])
    return left, factor_index(prod.factors[n_ir - 1]), right


def _expand_first_z(prod: ResolventProduct):
    p = prod.slots.index("z")
    s, f = prod.slots, prod.factors
    first = ResolventProduct(s[:p] + ("ir",) + s[p + 1:], f)
    second = ResolventProduct(s[:p] + ("ir", "z") + s[p + 1:], f[:p] + ("gamma2",) + f[p:])
    return first, second


def expand_ir(prod: ResolventProduct, N: int) -> Counter:
    """Expand a ``z``-product around ``R(ir)`` to depth ``N``.

    Each ``R(z)`` is rewritten through ``R(z) = R(ir) + R(ir) gamma_2 R(z)``
    at its leftmost ``z`` slot, ``N + 1`` times.  The result consists of
    pure ``R(ir)`` products (kept once produced) and products
    ``R_{N, j1}(ir, z) gamma_l R_{k2, j2}(z)``.

    Raises
    ------
    ValueError
        If the product has non-``z`` slots or a factor ``gamma2``.
    """
    if any(s != "z" for s in prod.slots) or any(f not in ("gamma0", "gamma1") for f in prod.factors):
        raise ValueError("expand_ir needs a perturbed z-product with indices in {0, 1}")
    if N < 0:
        raise ValueError("N must be nonnegative")
    terms = Counter({prod: 1})
    for _ in range(N + 1):
        nxt: Counter = Counter()
        for p, c in terms.items():
            if "z" not in p.slots:
                nxt[p] += c
                continue
            a, b = _expand_first_z(p)
            nxt[a] += c
            nxt[b] += c
        terms = nxt
    return terms


# ---------------------------------------------------------------------------
# numerical engine


@dataclass(frozen=True)
class Derivative:
    """``R^{(n)}`` (or ``R0^{(n)}``) evaluated by the Taylor recursion."""

    n: int
    free: bool = False


@dataclass(frozen=True)
class DerivativeDifference:
    """``R^{(n)} - R0^{(n)}`` evaluated by the Taylor recursion."""

    n: int


Spec = Union[ResolventProduct, Mapping, Derivative, DerivativeDifference, str, np.ndarray]


class _LU:
    def __init__(self, op: SectorOperator):
        dl, d, du = op.tridiagonal()
        self.op = op
        self.dl, self.d, self.du, self.du2, self.ipiv, info = lapack.zgttrf(
            dl.astype(complex), d.astype(complex), du.astype(complex))
        if info != 0:
            raise SolverError(f"singular pivot {info}: near-resonance of the truncated problem; "
                              "enlarge Im z or r_max")

    def _raw(self, b, trans):
        x, info = lapack.zgttrs(self.dl, self.d, self.du, self.du2, self.ipiv,
                                np.asarray(b, complex).reshape(-1, 1), trans=trans)
        if info != 0:  # pragma: no cover
            raise SolverError(f"zgttrs failed with info={info}")
        return x[:, 0]

    def solve(self, b, trans="N"):
        x = self._raw(b, trans)
        A = self.op if trans == "N" else None
        if A is not None:
            res = b - A @ x
            nb = np.linalg.norm(b)
            if nb > 0 and np.linalg.norm(res) > SOLVE_RTOL * nb:
                x = x + self._raw(res, trans)
                if np.linalg.norm(b - A @ x) > 1e3 * SOLVE_RTOL * nb:
                    raise SolverError("residual check failed after refinement: near-resonance; "
                                      "enlarge Im z or r_max")
        return x


class ResolventEngine:
    """Sector realization of ``P(z)``, ``P0(z)`` and their resolvents.

    Parameters
    ----------
    profile : CoefficientProfile
    grid : SectorGrid
    cap : float, optional
        Strength of the complex absorbing potential ``-i V_cap`` added to
        both ``P`` and ``P0``; ``V_cap`` is a quadratic ramp on the outer
        15% of the grid.
    cache_size : int
        Number of LU factorizations kept.
    """

    def __init__(self, profile: CoefficientProfile, grid: SectorGrid, cap: Optional[float] = None,
                 cache_size: int = 64):
        if profile.d != grid.d:
            raise ValueError("profile and grid dimensions differ")
        self.profile = profile
        self.grid = grid
        r = grid.r
        self.L = assemble_laplacian(profile, grid)
        self.L0 = assemble_laplacian(None, grid)
        self.Ldiff = self.L - self.L0
        self.w = profile.w(r)
        self.a = profile.a(r)
        self.aw = self.a * self.w
        self.cap = cap
        self.vcap = self._cap_profile(cap)
        self._cache: dict = {}
        self._cache_size = cache_size

    def _cap_profile(self, cap):
        if not cap:
            return np.zeros(self.grid.n)
        r0 = (1 - CAP_FRACTION) * self.grid.r_max
        x = np.clip((self.grid.r - r0) / (self.grid.r_max - r0), 0.0, None)
        return cap * x**2

    # -- assembly --------------------------------------------------------
    def pz(self, z: complex, free: bool = False) -> SectorOperator:
        """Assemble ``P(z)`` (or ``P0(z)``)."""
        z = complex(z)
        if free:
            diag = -z * z * np.ones(self.grid.n) - 1j * self.vcap
            L = self.L0
        else:
            diag = -1j * z * self.aw - z * z * self.w - 1j * self.vcap
            L = self.L
        out = -L
        D = out.diags.astype(complex)
        D[2] += diag
        return SectorOperator(self.grid, D)

    def _lu(self, z: complex, free: bool) -> _LU:
        key = (complex(z), bool(free))
        lu = self._cache.get(key)
        if lu is None:
            if not complex(z).imag > 0 and not self.cap:
                raise ValueError("resolvents need Im z > 0")
            lu = _LU(self.pz(z, free))
            if len(self._cache) >= self._cache_size:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = lu
        return lu

    def solve(self, z: complex, rhs, free: bool = False, adjoint: bool = False):
        """Apply ``R(z)`` (or ``R0(z)``), or its weighted adjoint."""
        lu = self._lu(z, free)
        if not adjoint:
            return lu.solve(rhs)
        q = self.grid.q
        return lu.solve(q * rhs, trans="C") / q

    # -- factors ---------------------------------------------------------
    def factor_values(self, kind: str, z: complex) -> np.ndarray:
        """Node values of the multiplication part of a factor."""
        z = complex(z)
        r = abs(z)
        w, aw = self.w, self.aw
        one = np.ones(self.grid.n)
        table = {
            "gamma0": lambda: 2 * w,
            "gamma1": lambda: 1j * aw + 2 * z * w,
            "gamma2": lambda: (r + 1j * z) * aw + (z * z + r * r) * w,
            "gamma0_free": lambda: 2 * one,
            "gamma1_free": lambda: 2 * z * one,
            "gamma2_free": lambda: (z * z + r * r) * one,
            "theta0": lambda: 2 * (w - 1),
            "theta1": lambda: 1j * aw + 2 * z * (w - 1),
            "theta2": lambda: 1j * z * aw + z * z * (w - 1),
        }
        return table[kind]()

    def apply_factor(self, kind: str, z: complex, v, adjoint: bool = False):
        m = self.factor_values(kind, z)
        out = (np.conj(m) if adjoint else m) * v
        if kind == "theta2":
            out = out + self.Ldiff @ v
        return out

    # -- products --------------------------------------------------------
    def _slot_solve(self, slot, z, zp, v, adjoint):
        at = zp if slot in ("z", "z0") else 1j * abs(z)
        return self.solve(at, v, free=slot in FREE_SLOTS, adjoint=adjoint)

    def apply_product(self, prod: ResolventProduct, z: complex, rhs, z_prime: Optional[complex] = None,
                      adjoint: bool = False):
        """Evaluate a product (or its weighted adjoint) on ``rhs``.

        ``"z"`` slots use ``z_prime`` (default ``z``), ``"ir"`` slots use
        ``i |z|``; factors are evaluated at ``z``.
        """
        zp = z if z_prime is None else z_prime
        v = np.asarray(rhs, dtype=complex)
        if not adjoint:
            v = self._slot_solve(prod.slots[-1], z, zp, v, False)
            for f, s in zip(reversed(prod.factors), reversed(prod.slots[:-1])):
                v = self._slot_solve(s, z, zp, self.apply_factor(f, z, v), False)
            return v
        v = self._slot_solve(prod.slots[0], z, zp, v, True)
        for f, s in zip(prod.factors, prod.slots[1:]):
            v = self._slot_solve(s, z, zp, self.apply_factor(f, z, v, adjoint=True), True)
        return v

    def apply_terms(self, terms: Mapping, z: complex, rhs, z_prime=None, adjoint=False):
        out = np.zeros(self.grid.n, dtype=complex)
        for prod, c in terms.items():
            out += c * self.apply_product(prod, z, rhs, z_prime, adjoint)
        return out

    def derivative(self, z: complex, rhs, n: int, free: bool = False, adjoint: bool = False):
        """``R^{(n)}(z) rhs`` via ``D_n = R (gamma_1 D_{n-1} + gamma_0/2 D_{n-2})``.

        ``D_n = R^{(n)}/n!``; the weighted adjoint uses the mirrored
        recursion with adjoint solves and conjugated multipliers.
        """
        if n < 0:
            raise ValueError("n must be nonnegative")
        g1 = self.factor_values("gamma1_free" if free else "gamma1", z)
        g0 = self.factor_values("gamma0_free" if free else "gamma0", z)
        if adjoint:
            g1, g0 = np.conj(g1), np.conj(g0)
        rhs = np.asarray(rhs, dtype=complex)
        prev2 = np.zeros_like(rhs)
        prev = self.solve(z, rhs, free, adjoint)
        for k in range(1, n + 1):
            cur = self.solve(z, g1 * prev + 0.5 * g0 * prev2, free, adjoint)
            prev2, prev = prev, cur
        return math.factorial(n) * prev

    def apply(self, spec: Spec, z: complex, rhs, z_prime=None, adjoint=False):
        """Apply any supported operator description."""
        if isinstance(spec, ResolventProduct):
            return self.apply_product(spec, z, rhs, z_prime, adjoint)
        if isinstance(spec, Mapping):
            return self.apply_terms(spec, z, rhs, z_prime, adjoint)
        if isinstance(spec, Derivative):
            return self.derivative(z, rhs, spec.n, spec.free, adjoint)
        if isinstance(spec, DerivativeDifference):
            return (self.derivative(z, rhs, spec.n, False, adjoint)
                    - self.derivative(z, rhs, spec.n, True, adjoint))
        if isinstance(spec, str) and spec == "identity":
            return np.array(rhs, dtype=complex)
        if isinstance(spec, str) and spec in FACTOR_KINDS:
            return self.apply_factor(spec, z, rhs, adjoint)
        if callable(spec):
            return spec(self, z, rhs, adjoint)
        vals = np.asarray(spec)
        if vals.shape == (self.grid.n,):
            return (np.conj(vals) if adjoint else vals) * rhs
        raise TypeError(f"unsupported operator description {spec!r}")


@dataclass(frozen=True)
class WeightedNorm:
    value: float
    ell_argmax: int
    per_ell: tuple
    iterations: tuple


def weighted_norm(profile: CoefficientProfile, grid: SectorGrid, spec: Spec, z: complex,
                  delta_left: float = 0.0, delta_right: float = 0.0, ell_max: int = 0,
                  z_prime: Optional[complex] = None, cap: Optional[float] = None,
                  tol: float = POWER_TOL, maxiter: int = POWER_MAXITER, seed: int = POWER_SEED,
                  engines: Optional[dict] = None) -> WeightedNorm:
    """``max_l || <r>^{-delta_left} T <r>^{-delta_right} ||`` by power iteration.

    Parameters
    ----------
    profile, grid
        ``grid.ell`` is ignored; sectors ``0..ell_max`` are scanned.
    spec
        Operator description accepted by :meth:`ResolventEngine.apply`.
    z, z_prime : complex
    delta_left, delta_right : float
        Weight exponents.
    engines : dict, optional
        Reusable ``{ell: ResolventEngine}`` (factorizations are cached).

    Returns
    -------
    WeightedNorm
    """
    vals, its = [], []
    for ell in range(ell_max + 1):
        if engines is not None and ell in engines:
            eng = engines[ell]
        else:
            eng = ResolventEngine(profile, grid.with_ell(ell), cap=cap)
            if engines is not None:
                engines[ell] = eng
        wl, wr = weight(eng.grid, delta_left), weight(eng.grid, delta_right)
        fwd = lambda v: wl * eng.apply(spec, z, wr * v, z_prime)
        adj = lambda v: wr * eng.apply(spec, z, wl * v, z_prime, adjoint=True)
        est = power_norm(fwd, adj, eng.grid.q, tol=tol, maxiter=maxiter, seed=seed)
        vals.append(est.value)
        its.append(est.iterations)
    k = int(np.argmax(vals))
    return WeightedNorm(float(vals[k]), k, tuple(vals), tuple(its))


# ---------------------------------------------------------------------------
# numerical oracles


def finite_difference_derivative(engine: ResolventEngine, z: complex, rhs, n: int, h: Optional[float] = None,
                                 free: bool = False, levels: int = 4) -> np.ndarray:
    """Central differences of ``z -> R(z) rhs`` with Richardson extrapolation.

    The order-``n`` stencil ``sum_k (-1)^k C(n,k) R(z + (n/2 - k) h)`` has
    error ``O(h^2)``; ``levels`` step halvings are combined to remove the
    even error terms.  The nearest poles lie about ``Im z`` away, so the
    default step is ``0.2 |Im z|``: the stencil stays well inside the disc
    of analyticity and the extrapolated error stays below 1e-6 up to
    ``n = 4``.
    """
    from scipy.special import comb

    if h is None:
        h = 0.2 * abs(z.imag)
    if n == 0:
        return engine.solve(z, rhs, free)

    def raw(step):
        acc = np.zeros(engine.grid.n, dtype=complex)
        for k in range(n + 1):
            acc += (-1) ** k * comb(n, k, exact=True) * engine.solve(z + (n / 2 - k) * step, rhs, free)
        return acc / step**n

    table = [raw(h / 2**i) for i in range(levels)]
    for j in range(1, levels):
        f = 4.0**j
        table = [(f * table[i + 1] - table[i]) / (f - 1) for i in range(len(table) - 1)]
    return table[0]


def identity_residuals(engine: ResolventEngine, z: complex, seed: int = POWER_SEED,
                       expansions=((0, ()), (1, (1,)), (1, (0,)), (2, (1, 0)), (2, (1, 1))),
                       depths=(0, 1, 2, 3)) -> dict:
    """Relative residuals of the resolvent identities on a random vector.

    Returns a dict with keys ``"P R = I"``, ``"R - R0 = R theta R0"``,
    ``"R(z) - R(ir) = R(ir) gamma2 R(z)"`` and one ``"expand k=.. j=.. N=.."``
    entry per expansion.
    """
    g = engine.grid
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(g.n) + 1j * rng.standard_normal(g.n)
    nf = g.norm(f)
    rz = engine.solve(z, f)
    out = {"P R = I": g.norm(engine.pz(z) @ rz - f) / nf}
    bridge = ResolventProduct(("z", "z0"), ("theta2",))
    d = rz - engine.solve(z, f, free=True) - engine.apply_product(bridge, z, f)
    out["R - R0 = R theta R0"] = g.norm(d) / nf
    ir = ResolventProduct(("ir", "z"), ("gamma2",))
    d = rz - engine.solve(1j * abs(z), f) - engine.apply_product(ir, z, f)
    out["R(z) - R(ir) = R(ir) gamma2 R(z)"] = g.norm(d) / nf
    for _, idx in expansions:
        prod = chain(idx)
        ref = engine.apply_product(prod, z, f)
        for N in depths:
            d = engine.apply_terms(expand_ir(prod, N), z, f) - ref
            out[f"expand k={len(idx)} j={idx} N={N}"] = g.norm(d) / g.norm(ref)
    return out


def adjoint_law_residual(engine: ResolventEngine, z: complex) -> float:
    """Max entrywise gap between ``R(z)^*`` (measure adjoint) and ``R(-conj z)``."""
    n = engine.grid.n
    q = engine.grid.q
    eye = np.eye(n)
    Rz = np.column_stack([engine.solve(z, eye[:, j]) for j in range(n)])
    Rm = np.column_stack([engine.solve(-np.conj(z), eye[:, j]) for j in range(n)])
    Radj = (np.conj(Rz.T) * q[None, :]) / q[:, None]
    return float(np.abs(Radj - Rm).max() / np.abs(Rm).max())
