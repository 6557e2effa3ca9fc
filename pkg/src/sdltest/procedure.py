"""End-to-end SDL-test: Lasso, debiasing, p-values."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .debias import DebiasedEstimate, debias
from .exceptions import InvalidParameterError
from .inference import TestReport, p_values
from .solver import LassoFit, calibrate_lambda, fit_lasso
from .theory import epsilon_bar, minimax_threshold_kappa


@dataclass(frozen=True)
class SDLResult:
    fit: LassoFit
    estimate: DebiasedEstimate
    report: TestReport
    kappa: Optional[float]

    @property
    def lam(self) -> float:
        return self.fit.lam


def default_kappa(n: int, p: int) -> float:
    """Minimax threshold at the ballpark sparsity ``epsilon_bar(n / p)``."""
    return minimax_threshold_kappa(epsilon_bar(n / p))


def sdl_test(
    X,
    y,
    alpha: float = 0.05,
    precision: Optional[np.ndarray] = None,
    lam: Optional[float] = None,
    kappa: Optional[float] = None,
    calibration_tol: float = 1e-4,
) -> SDLResult:
    """Run the full test.

    With ``lam`` given the Lasso is solved at that level; otherwise ``lam`` is
    calibrated so that ``lam * d = kappa * tau`` (``kappa`` defaulting to
    :func:`default_kappa`).  ``precision`` is the (estimated or exact) inverse
    covariance; ``None`` means the identity.
    """
    X = np.asfortranarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if lam is not None:
        if kappa is not None:
            raise InvalidParameterError("give either lam or kappa, not both")
        fit = fit_lasso(X, y, lam)
    else:
        if kappa is None:
            kappa = default_kappa(n, p)
        _, fit = calibrate_lambda(X, y, kappa, tol=calibration_tol)
    est = debias(fit, X, y, precision)
    diag = None if precision is None else np.diag(precision)
    return SDLResult(fit=fit, estimate=est, report=p_values(est, diag, alpha), kappa=kappa)
