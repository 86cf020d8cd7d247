"""Operator norms in the weighted inner product and log-log slope fits."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)

POWER_TOL = 1e-4
POWER_MAXITER = 500
POWER_SEED = 20240531


class PowerIterationError(RuntimeError):
    """Raised when power iteration does not reach its tolerance."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class NormEstimate:
    value: float
    iterations: int
    converged: bool


def power_norm(apply: Callable, apply_adjoint: Callable, q: np.ndarray, tol: float = POWER_TOL,
               maxiter: int = POWER_MAXITER, seed: int = POWER_SEED, strict: bool = True,
               start: np.ndarray | None = None) -> NormEstimate:
    """Norm of ``T`` by power iteration on ``T^* T``.

    Parameters
    ----------
    apply, apply_adjoint : callable
        Actions of ``T`` and of its adjoint in the weighted inner product.
    q : ndarray
        Quadrature weights of the inner product.
    tol : float
        Relative change of successive estimates that stops the iteration.
    maxiter : int
    seed : int
        Seed of the random complex start vector.
    strict : bool
        Raise ``PowerIterationError`` on non-convergence instead of
        returning the last estimate.

    Returns
    -------
    NormEstimate
    """
    rng = np.random.default_rng(seed)
    n = q.size
    if start is None:
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    else:
        x = np.asarray(start, dtype=complex).copy()
    wnorm = lambda v: np.sqrt(np.sum(q * np.abs(v) ** 2))
    x /= wnorm(x)
    est, history = 0.0, []
    for it in range(1, maxiter + 1):
        y = apply(x)
        ny = wnorm(y)
        if ny == 0:
            return NormEstimate(0.0, it, True)
        x = apply_adjoint(y)
        nx = wnorm(x)
        new = float(np.sqrt(nx))  # ||T^*T x|| -> sigma_max^2 as x aligns
        history.append(new)
        if it > 1 and abs(new - est) <= tol * new:
            return NormEstimate(new, it, True)
        est = new
        x /= nx
    msg = f"power iteration did not converge in {maxiter} steps (last estimates {history[-3:]})"
    if strict:
        raise PowerIterationError(msg, history)
    logger.warning(msg)
    return NormEstimate(est, maxiter, False)


def dense_weighted_norm(T: np.ndarray, q: np.ndarray) -> float:
    """Exact weighted operator norm of a dense matrix (SVD oracle)."""
    sq = np.sqrt(q)
    return float(np.linalg.norm(sq[:, None] * T / sq[None, :], 2))


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    residual: float


def fit_loglog(x, y) -> SlopeFit:
    """Least-squares fit of ``log y = slope log x + c``.

    ``residual`` is the root-mean-square deviation in log space.
    """
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - A @ coef
    return SlopeFit(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res**2))))
