"""Lasso by cyclic coordinate descent.

Minimizes ``(1/2n) ||y - X theta||^2 + lam ||theta||_1``.  The inner sweep is
a numba kernel that keeps the residual up to date after every coordinate
move, so each update costs O(n).  Coordinates that soft-threshold to zero are
stored as literal zeros; the support count is therefore exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from .exceptions import CalibrationError, InvalidParameterError, NonConvergenceError

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 100_000


def soft_threshold(x, t):
    """``sign(x) * max(|x| - t, 0)``, elementwise for arrays."""
    if np.any(np.asarray(t) < 0):
        raise InvalidParameterError("threshold must be non-negative")
    out = np.sign(x) * np.maximum(np.abs(x) - t, 0.0)
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class LassoFit:
    lam: float
    theta_hat: np.ndarray
    support_size: int
    iterations: int
    kkt_gap: float

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.theta_hat)


@dataclass(frozen=True)
class LassoPath:
    grid: np.ndarray
    fits: list = field(default_factory=list)


@numba.njit(cache=True)
def _sweep(X, beta, resid, col_sq, lam, n, idx):
    max_step = 0.0
    for k in range(idx.shape[0]):
        j = idx[k]
        cj = col_sq[j]
        if cj == 0.0:
            continue
        old = beta[j]
        g = 0.0
        for i in range(n):
            g += X[i, j] * resid[i]
        z = g / n + cj * old
        if z > lam:
            new = (z - lam) / cj
        elif z < -lam:
            new = (z + lam) / cj
        else:
            new = 0.0
        if new != old:
            delta = new - old
            for i in range(n):
                resid[i] -= delta * X[i, j]
            beta[j] = new
            step = abs(delta) * math.sqrt(cj)
            if step > max_step:
                max_step = step
    return max_step


@numba.njit(cache=True)
def _coordinate_descent(X, beta, resid, col_sq, lam, tol, max_iter):
    n, p = X.shape
    everything = np.arange(p)
    it = 0
    while it < max_iter:
        step = _sweep(X, beta, resid, col_sq, lam, n, everything)
        it += 1
        if step < tol:
            break
        active = np.flatnonzero(beta)
        while it < max_iter:
            step = _sweep(X, beta, resid, col_sq, lam, n, active)
            it += 1
            if step < tol:
                break
    return it


def kkt_gap(X, y, theta, lam) -> float:
    """Largest violation of the Lasso optimality conditions at ``theta``."""
    n = X.shape[0]
    grad = X.T @ (y - X @ theta) / n
    on = theta != 0
    gap_off = np.abs(grad[~on]) - lam
    gap_on = np.abs(grad[on] - lam * np.sign(theta[on]))
    worst = 0.0
    if gap_off.size:
        worst = max(worst, float(gap_off.max()))
    if gap_on.size:
        worst = max(worst, float(gap_on.max()))
    return worst


def lasso_objective(X, y, theta, lam) -> float:
    n = X.shape[0]
    r = y - X @ theta
    return float(r @ r / (2 * n) + lam * np.abs(theta).sum())


def lambda_max(X, y) -> float:
    """Smallest ``lam`` whose solution is the zero vector."""
    return float(np.max(np.abs(X.T @ y)) / X.shape[0])


def fit_lasso(
    X,
    y,
    lam: float,
    warm_start=None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> LassoFit:
    """Solve the Lasso at a single ``lam``.

    Converged means the last full sweep moved no coordinate by more than
    ``tol`` (in units of the column scale) and the KKT gap is at most ``tol``.
    Raises :class:`NonConvergenceError` otherwise.
    """
    X = np.asfortranarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if lam < 0:
        raise InvalidParameterError(f"lambda must be >= 0, got {lam}")
    if lam == 0 and p > n:
        raise InvalidParameterError("lambda = 0 with p > n has no unique minimizer")
    col_sq = np.einsum("ij,ij->j", X, X) / n
    if lam == 0 and np.any(col_sq == 0):
        raise InvalidParameterError("lambda = 0 requires every column to be non-zero")

    if lam > 0 and lambda_max(X, y) - lam <= 1e-12 * lam:
        # zero is optimal up to rounding; the kernel could leave 1e-16 entries
        zero = np.zeros(p)
        zero.setflags(write=False)
        return LassoFit(lam=float(lam), theta_hat=zero, support_size=0, iterations=0, kkt_gap=kkt_gap(X, y, zero, lam))
    beta = np.zeros(p) if warm_start is None else np.array(warm_start, dtype=float)

    total = 0
    gap = np.inf
    # Restart the kernel from a freshly computed residual until the KKT
    # certificate holds; the in-kernel residual accumulates rounding error.
    while total < max_iter:
        resid = y - X @ beta
        total += _coordinate_descent(X, beta, resid, col_sq, float(lam), float(tol), max_iter - total)
        gap = kkt_gap(X, y, beta, lam)
        if gap <= tol:
            break
    if gap > tol:
        raise NonConvergenceError(
            f"coordinate descent hit max_iter={max_iter} with KKT gap {gap:.3e}",
            kkt_gap=gap,
            iterations=total,
        )
    beta.setflags(write=False)
    return LassoFit(
        lam=float(lam),
        theta_hat=beta,
        support_size=int(np.count_nonzero(beta)),
        iterations=total,
        kkt_gap=gap,
    )


def lambda_grid(lam_max: float, grid_size: int = 100, lambda_min_ratio: float = 1e-3) -> np.ndarray:
    if grid_size < 2:
        raise InvalidParameterError("grid_size must be >= 2")
    if not 0 < lambda_min_ratio < 1:
        raise InvalidParameterError("lambda_min_ratio must lie in (0, 1)")
    return lam_max * np.geomspace(1.0, lambda_min_ratio, grid_size)


def lasso_path(
    X,
    y,
    grid_size: int = 100,
    lambda_min_ratio: float = 1e-3,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> LassoPath:
    """Warm-started fits on a geometric grid from ``lambda_max`` downward."""
    grid = lambda_grid(lambda_max(X, y), grid_size, lambda_min_ratio)
    fits = []
    beta = None
    for lam in grid:
        fit = fit_lasso(X, y, lam, warm_start=beta, tol=tol, max_iter=max_iter)
        fits.append(fit)
        beta = fit.theta_hat
    return LassoPath(grid=grid, fits=fits)


def _balance(X, y, fit: LassoFit, kappa: float) -> tuple[float, float, float]:
    """``(lam*d - kappa*tau, d, tau)`` for a fit."""
    from .debias import mad_tau, scale_factor_d

    n = X.shape[0]
    d = scale_factor_d(fit.support_size, n)
    tau = mad_tau(y - X @ fit.theta_hat, d, n)
    return fit.lam * d - kappa * tau, d, tau


def calibrate_lambda(
    X,
    y,
    kappa: float,
    tol: float = 1e-4,
    grid_size: int = 100,
    lambda_min_ratio: float = 1e-3,
    solver_tol: float = DEFAULT_TOL,
    max_bisect: int = 200,
) -> tuple[float, LassoFit]:
    """Find ``lam`` with ``lam * d(lam) = kappa * tau(lam)``.

    Walks the warm-started path from ``lambda_max`` down until the sign of
    ``lam*d - kappa*tau`` flips, then bisects (in log-lambda) between the two
    bracketing grid points.  Stops when the relative mismatch is below ``tol``.

    The mismatch factors as ``d * (lam - kappa * m(lam) / (Phi^{-1}(0.75) sqrt(n)))``
    with ``m`` the median absolute residual, which is continuous in ``lam``,
    so bisection converges even though ``d`` jumps with the support.
    """
    if not kappa > 0:
        raise InvalidParameterError(f"kappa must be positive, got {kappa}")
    X = np.asfortranarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    grid = lambda_grid(lambda_max(X, y), grid_size, lambda_min_ratio)

    def solve(lam, warm):
        return fit_lasso(X, y, lam, warm_start=warm, tol=solver_tol)

    def converged(f, tau):
        return abs(f) <= tol * kappa * tau

    hi_fit = solve(grid[0], None)
    f_hi, _, tau_hi = _balance(X, y, hi_fit, kappa)
    if converged(f_hi, tau_hi):
        return hi_fit.lam, hi_fit
    if f_hi < 0:
        raise CalibrationError(
            f"lam*d - kappa*tau is already negative at lambda_max ({f_hi:.3e})",
            endpoints=(grid[0], f_hi),
        )
    lo_fit = None
    f_lo = None
    for lam in grid[1:]:
        fit = solve(lam, hi_fit.theta_hat)
        if fit.support_size >= n:
            break
        f, _, tau = _balance(X, y, fit, kappa)
        if converged(f, tau):
            return fit.lam, fit
        if f < 0:
            lo_fit, f_lo = fit, f
            break
        hi_fit, f_hi = fit, f
    if lo_fit is None:
        raise CalibrationError(
            "no sign change of lam*d - kappa*tau along the path "
            f"(last value {f_hi:.3e} at lambda={hi_fit.lam:.4g})",
            endpoints=(grid[0], hi_fit.lam),
        )

    best = lo_fit
    for _ in range(max_bisect):
        lam = math.sqrt(hi_fit.lam * lo_fit.lam)
        fit = solve(lam, hi_fit.theta_hat)
        f, _, tau = _balance(X, y, fit, kappa)
        best = fit
        if converged(f, tau):
            return fit.lam, fit
        if f > 0:
            hi_fit = fit
        else:
            lo_fit = fit
        if hi_fit.lam - lo_fit.lam <= 1e-15 * hi_fit.lam:
            break
    raise CalibrationError(
        f"bisection stalled at lambda={best.lam:.6g} without meeting tol={tol}",
        endpoints=(hi_fit.lam, lo_fit.lam),
    )
