"""Covariance estimation by hard-thresholding the sample covariance.

The threshold comes from a two-pass three-sigma rule on the entries of
``S = X^T X / n``: the first pass trims the bulk, the second fits a normal
to what remains and zeroes every entry within three fitted standard
deviations of zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .exceptions import DegenerateSpreadError, InvalidParameterError, NumericalError


@dataclass(frozen=True)
class CovEstimate:
    sigma_hat: np.ndarray
    sigma1: float
    sigma2: float
    kept_fraction: float

    @property
    def threshold(self) -> float:
        return 3.0 * self.sigma2


def sample_covariance(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    S = X.T @ X / X.shape[0]
    return 0.5 * (S + S.T)


def hard_threshold(S, level: float) -> np.ndarray:
    return np.where(np.abs(S) >= level, S, 0.0)


def estimate_covariance(X) -> CovEstimate:
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if n < 2 or p < 2:
        raise InvalidParameterError(f"need n >= 2 and p >= 2, got n={n}, p={p}")
    S = sample_covariance(X)
    entries = S.ravel()
    sigma1 = float(entries.std())
    trimmed = entries[np.abs(entries) <= 3.0 * sigma1]
    # maximum-likelihood normal fit: sample mean and (ddof=0) standard deviation
    sigma2 = float(trimmed.std()) if trimmed.size else 0.0
    if sigma2 == 0.0:
        raise DegenerateSpreadError("trimmed entries of S have zero spread; threshold undefined")
    sigma_hat = hard_threshold(S, 3.0 * sigma2)
    kept = float(np.count_nonzero(sigma_hat)) / entries.size
    return CovEstimate(sigma_hat=sigma_hat, sigma1=sigma1, sigma2=sigma2, kept_fraction=kept)


def offdiag_row_max(M) -> np.ndarray:
    """``max_{j != i} |M_ij|`` for every row ``i``."""
    A = np.abs(np.asarray(M, dtype=float)).copy()
    np.fill_diagonal(A, 0.0)
    return A.max(axis=1)


def offdiag_bound(sigma_hat_row_max, p: int, n: int):
    """High-probability bound ``max_j |Sigma_ij| <= row_max + 20 sqrt(log p / n)``.

    The guarantee (probability at least ``1 - 6 p^{-1/3}``) needs
    ``log(p) / n < 0.01``; the value is returned regardless.
    """
    if p < 2 or n < 1:
        raise InvalidParameterError(f"need p >= 2 and n >= 1, got p={p}, n={n}")
    return sigma_hat_row_max + 20.0 * math.sqrt(math.log(p) / n)


def offdiag_bound_probability(p: int) -> float:
    """Lower bound ``1 - 6 p^{-1/3}`` on the probability the bound holds for one row."""
    return 1.0 - 6.0 * p ** (-1.0 / 3.0)


@dataclass(frozen=True)
class PrecisionEstimate:
    precision: np.ndarray
    ridge: float


def invert_covariance(sigma_hat, max_ridge_exponent: int = 0) -> PrecisionEstimate:
    """Invert a thresholded covariance via Cholesky.

    Thresholding need not keep the matrix positive definite.  When the plain
    factorization fails, ridges ``1e-8, 1e-7, ...`` up to ``10**max_ridge_exponent``
    are tried in turn and the first that works is reported.
    """
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    p = sigma_hat.shape[0]
    eye = np.eye(p)
    ridges = [0.0] + [10.0**k for k in range(-8, max_ridge_exponent + 1)]
    for ridge in ridges:
        try:
            factor = linalg.cho_factor(sigma_hat + ridge * eye, lower=True)
        except linalg.LinAlgError:
            continue
        prec = linalg.cho_solve(factor, eye)
        return PrecisionEstimate(precision=0.5 * (prec + prec.T), ridge=ridge)
    raise NumericalError("covariance estimate is not positive definite even after ridging")
