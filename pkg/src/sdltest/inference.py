"""P-values, test decisions and error rates.

Two-sided tests on the debiased estimate: ``z_i = theta_u_i / (tau sqrt(Omega_ii))``
and ``P_i = 2 (1 - Phi(|z_i|))``, rejecting when ``P_i <= alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .debias import DebiasedEstimate
from .exceptions import InvalidParameterError, InvalidPrecisionError
from .normal import normal_cdf, normal_quantile, normal_sf  # noqa: F401  (re-exported)
from .solver import LassoFit

#: p-values below this are reported as exactly zero
PVALUE_FLOOR = 1e-300


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise InvalidParameterError(f"alpha must lie in (0, 1), got {alpha}")


def two_sided_pvalues(z) -> np.ndarray:
    pv = 2.0 * normal_sf(np.abs(np.asarray(z, dtype=float)))
    pv = np.minimum(np.atleast_1d(pv), 1.0)
    pv[pv < PVALUE_FLOOR] = 0.0
    return pv


@dataclass(frozen=True)
class TestReport:
    alpha: float
    p_values: np.ndarray
    decisions: np.ndarray
    z_scores: np.ndarray

    __test__ = False  # not a pytest class

    def at_level(self, alpha: float) -> "TestReport":
        """Same p-values, decisions re-thresholded at another level."""
        _check_alpha(alpha)
        return TestReport(alpha, self.p_values, (self.p_values <= alpha).astype(np.int8), self.z_scores)


def _report(z, alpha, p_values=None) -> TestReport:
    _check_alpha(alpha)
    z = np.asarray(z, dtype=float)
    pv = two_sided_pvalues(z) if p_values is None else p_values
    return TestReport(alpha=float(alpha), p_values=pv, decisions=(pv <= alpha).astype(np.int8), z_scores=z)


def p_values(est: DebiasedEstimate, precision_diag=None, alpha: float = 0.05) -> TestReport:
    """SDL-test p-values; ``precision_diag`` holds ``(Sigma^{-1})_ii`` (default all ones)."""
    if not est.tau > 0:
        raise InvalidParameterError("tau must be positive")
    if precision_diag is None:
        scale = np.ones_like(est.theta_u)
    else:
        scale = np.asarray(precision_diag, dtype=float)
        if scale.shape != est.theta_u.shape:
            raise InvalidPrecisionError("precision_diag has the wrong length")
        if np.any(~(scale > 0)):
            raise InvalidPrecisionError("precision diagonal must be strictly positive")
    z = est.theta_u / (est.tau * np.sqrt(scale))
    return _report(z, alpha)


@dataclass(frozen=True)
class ErrorSummary:
    """Empirical type-I error over the nulls and power over the actives.

    A side is ``None`` when its index set is empty.
    """

    type_I: Optional[float]
    power: Optional[float]
    n_active: int
    n_inactive: int


def evaluate(report: TestReport, theta0) -> ErrorSummary:
    theta0 = np.asarray(theta0)
    if theta0.shape != report.decisions.shape:
        raise InvalidParameterError("theta0 and decisions differ in length")
    active = theta0 != 0
    dec = report.decisions.astype(float)
    n_act = int(active.sum())
    n_in = int((~active).sum())
    type_I = float(dec[~active].mean()) if n_in else None
    power = float(dec[active].mean()) if n_act else None
    return ErrorSummary(type_I=type_I, power=power, n_active=n_act, n_inactive=n_in)


@dataclass(frozen=True)
class CovFreeParams:
    """Inputs of the covariance-free test.

    ``s0_bound`` and ``phi0`` (compatibility constant) cannot be estimated from
    data. :func:`covfree_params` defaults them to the fitted support size and 1;
    those defaults carry no guarantee.
    """

    s0_bound: int
    phi0: float
    t: float
    max_offdiag: np.ndarray

    def __post_init__(self):
        if not self.phi0 > 0:
            raise InvalidParameterError(f"phi0 must be positive, got {self.phi0}")
        if self.s0_bound < 1:
            raise InvalidParameterError(f"s0_bound must be >= 1, got {self.s0_bound}")
        if not self.t > 0:
            raise InvalidParameterError(f"t must be positive, got {self.t}")


def covfree_params(fit: LassoFit, max_offdiag, s0_bound=None, phi0: float = 1.0, t: float = 2.0) -> CovFreeParams:
    if s0_bound is None:
        s0_bound = max(1, fit.support_size)
    return CovFreeParams(s0_bound=int(s0_bound), phi0=float(phi0), t=float(t), max_offdiag=np.asarray(max_offdiag, dtype=float))


def covfree_lambda(sigma: float, p: int, n: int, t: float = 2.0) -> float:
    """Regularization ``4 sigma sqrt((t^2 + 2 log p) / n)`` behind the l1 error bound."""
    return 4.0 * sigma * math.sqrt((t**2 + 2.0 * math.log(p)) / n)


def covfree_test(fit: LassoFit, est: DebiasedEstimate, params: CovFreeParams, alpha: float = 0.05) -> TestReport:
    """Test that bounds, rather than estimates, the effect of an unknown covariance.

    Assumes unit-variance columns.  ``xi_i = (theta_hat_i + score_i) / tau`` and
    ``P_i = 2 (1 - Phi((|xi_i| - Delta_i)_+))`` with
    ``Delta_i = 4 lam s0_bound max_offdiag_i / (tau phi0^2)``.
    """
    if not est.tau > 0:
        raise InvalidParameterError("tau must be positive")
    xi = (est.theta_hat + est.score) / est.tau
    if params.max_offdiag.shape != xi.shape:
        raise InvalidParameterError("max_offdiag has the wrong length")
    delta = 4.0 * fit.lam * params.s0_bound / (est.tau * params.phi0**2) * params.max_offdiag
    shrunk = np.maximum(np.abs(xi) - delta, 0.0)
    return _report(xi, alpha, p_values=two_sided_pvalues(shrunk))
