"""Debiased Lasso estimate and its noise scale.

Given a Lasso fit at ``lam``::

    d        = (1 - ||theta_hat||_0 / n)^{-1}
    r        = (d / sqrt(n)) (y - X theta_hat)
    tau      = |r|_(ceil(n/2)) / Phi^{-1}(0.75)
    theta_u  = theta_hat + (d / n) Omega X^T (y - X theta_hat)

where ``Omega`` is the precision matrix (identity for standard designs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DegenerateSupportError, InvalidPrecisionError, InvalidParameterError, ZeroScaleError
from .normal import PHI_INV_075
from .solver import LassoFit

_SYM_TOL = 1e-10


@dataclass(frozen=True)
class DebiasedEstimate:
    theta_u: np.ndarray
    theta_hat: np.ndarray
    d: float
    tau: float
    r: np.ndarray
    # (d/n) X^T (y - X theta_hat), before any precision is applied
    score: np.ndarray
    used_precision: str  # "identity" or "supplied"
    lam: float = float("nan")


def scale_factor_d(support_size: int, n: int) -> float:
    if support_size < 0:
        raise InvalidParameterError("support_size must be non-negative")
    if support_size >= n:
        raise DegenerateSupportError(
            f"support size {support_size} >= n = {n}; the scale factor d is undefined"
        )
    return 1.0 / (1.0 - support_size / n)


def median_index(n: int) -> int:
    """1-based rank of the order statistic used by the MAD estimate."""
    return math.ceil(n / 2)


def mad_tau(residual, d: float, n: int) -> float:
    """MAD estimate of the scale of ``(d/sqrt(n)) * residual``.

    Uses the ``ceil(n/2)``-th largest absolute entry.
    """
    if n < 2:
        raise InvalidParameterError("mad_tau needs n >= 2")
    v = np.abs(np.asarray(residual, dtype=float))
    if v.shape != (n,):
        raise InvalidParameterError(f"residual must have length n={n}, got shape {v.shape}")
    ell = median_index(n)
    # ell-th largest == (n - ell)-th smallest, zero-based
    m = np.partition(v, n - ell)[n - ell]
    if m == 0.0:
        raise ZeroScaleError("median absolute residual is zero; tau would vanish")
    return float(m * d / (math.sqrt(n) * PHI_INV_075))


def _check_precision(precision: np.ndarray, p: int) -> np.ndarray:
    omega = np.asarray(precision, dtype=float)
    if omega.shape != (p, p):
        raise InvalidPrecisionError(f"precision must be {p}x{p}, got {omega.shape}")
    scale = max(1.0, float(np.max(np.abs(omega))))
    if np.max(np.abs(omega - omega.T)) > _SYM_TOL * scale:
        raise InvalidPrecisionError("precision matrix is not symmetric")
    return omega


def debias(fit: LassoFit, X, y, precision: Optional[np.ndarray] = None) -> DebiasedEstimate:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    d = scale_factor_d(fit.support_size, n)
    resid = y - X @ fit.theta_hat
    score = (d / n) * (X.T @ resid)
    if precision is None:
        theta_u = fit.theta_hat + score
        used = "identity"
    else:
        omega = _check_precision(precision, p)
        theta_u = fit.theta_hat + omega @ score
        used = "supplied"
    tau = mad_tau(resid, d, n)
    r = (d / math.sqrt(n)) * resid
    return DebiasedEstimate(
        theta_u=theta_u,
        theta_hat=np.asarray(fit.theta_hat),
        d=d,
        tau=tau,
        r=r,
        score=score,
        used_precision=used,
        lam=fit.lam,
    )
