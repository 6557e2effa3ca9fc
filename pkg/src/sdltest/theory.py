"""Analytic power theory.

Two-sided z-test power ``G(alpha, u)``, the minimax risk ``M(eps)`` of soft
thresholding over eps-sparse signals, the worst-case noise level ``tau_*``,
the scalar state-evolution recursion for the Lasso under i.i.d. Gaussian
designs, and upper bounds on the power of any test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import linalg, special

from .exceptions import InvalidParameterError, NoFixedPointError, NumericalError
from .normal import normal_cdf, normal_pdf, normal_quantile, normal_sf


def G(alpha: float, u: float) -> float:
    """Power of the level-``alpha`` two-sided z-test at standardized effect ``u``.

    ``G(alpha, u) = 2 - Phi(z + u) - Phi(z - u)`` with ``z = Phi^{-1}(1 - alpha/2)``.
    """
    if not 0.0 <= alpha <= 1.0:
        raise InvalidParameterError(f"alpha must lie in [0, 1], got {alpha}")
    if u < 0:
        raise InvalidParameterError(f"u must be non-negative, got {u}")
    if alpha == 0.0:
        return 0.0
    if alpha == 1.0:
        return 1.0
    z = normal_quantile(1.0 - alpha / 2.0)
    value = normal_sf(z + u) + normal_sf(z - u)
    return min(1.0, max(alpha, value))


# --------------------------------------------------------------------------
# Minimax soft-thresholding risk
# --------------------------------------------------------------------------


def _tail_gap(xi):
    # phi(xi) - xi * Phi(-xi) >= 0
    return normal_pdf(xi) - xi * normal_sf(xi)


def sparsity_of_threshold(xi: float) -> float:
    """The eps at which ``xi`` is the minimax soft threshold (decreasing in ``xi``)."""
    a = 2.0 * _tail_gap(xi)
    return a / (xi + a)


def risk_of_threshold(xi: float) -> float:
    """Minimax risk attained at threshold ``xi``."""
    a = 2.0 * _tail_gap(xi)
    return 2.0 * normal_pdf(xi) / (xi + a)


def minimax_risk(epsilon: float, xtol: float = 1e-12) -> tuple[float, float]:
    """``(xi_star, M)`` for sparsity ``epsilon`` in (0, 1).

    ``xi_star`` solves ``sparsity_of_threshold(xi) = epsilon``; the map is
    strictly decreasing from 1 (at 0) to 0 (at infinity), so a bracket is
    grown by doubling and then bisected.
    """
    if not 0.0 < epsilon < 1.0:
        raise InvalidParameterError(f"epsilon must lie in (0, 1), got {epsilon}")
    lo, hi = 0.0, 1.0
    while sparsity_of_threshold(hi) > epsilon:
        lo, hi = hi, 2.0 * hi
        if hi > 1e3:
            raise NumericalError(f"no threshold bracket for epsilon={epsilon}")
    while hi - lo > xtol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if sparsity_of_threshold(mid) > epsilon:
            lo = mid
        else:
            hi = mid
    xi = 0.5 * (lo + hi)
    return xi, risk_of_threshold(xi)


def minimax_threshold_kappa(epsilon: float) -> float:
    """Threshold-to-noise ratio that attains ``M(epsilon)``."""
    return minimax_risk(epsilon)[0]


def epsilon_bar(delta: float) -> float:
    """Ballpark sparsity ``0.25 * delta / log(2 / delta)`` used when eps is unknown."""
    if not 0.0 < delta < 2.0:
        raise InvalidParameterError(f"epsilon_bar needs 0 < delta < 2, got {delta}")
    return 0.25 * delta / math.log(2.0 / delta)


def tau_star(epsilon: float, delta: float) -> float:
    """Worst-case normalized noise level; ``math.inf`` when ``delta <= M(epsilon)``."""
    if epsilon == 0.0:
        return 1.0
    _, m = minimax_risk(epsilon)
    if delta <= m:
        return math.inf
    return math.sqrt(1.0 / (1.0 - m / delta))


@dataclass(frozen=True)
class TheoryPoint:
    epsilon: float
    delta: float
    xi_star: float
    M: float
    tau_star: float

    @property
    def finite(self) -> bool:
        return math.isfinite(self.tau_star)

    def power(self, alpha: float, mu0: float) -> float:
        """Asymptotic power lower bound ``G(alpha, mu0 / tau_*)``."""
        if not self.finite:
            return G(alpha, 0.0)
        return G(alpha, mu0 / self.tau_star)


def theory_point(epsilon: float, delta: float) -> TheoryPoint:
    xi, m = minimax_risk(epsilon)
    ts = math.inf if delta <= m else math.sqrt(1.0 / (1.0 - m / delta))
    return TheoryPoint(epsilon=epsilon, delta=delta, xi_star=xi, M=m, tau_star=ts)


# --------------------------------------------------------------------------
# State evolution
# --------------------------------------------------------------------------


def soft_threshold_risk(x, thr):
    """``E[(eta(x + Z; thr) - x)^2]`` for ``Z ~ N(0, 1)``, closed form."""
    x = np.asarray(x, dtype=float)
    a = thr - x
    b = -thr - x
    out = (
        1.0
        + thr**2
        + (x**2 - thr**2 - 1.0) * (normal_cdf(a) - normal_cdf(b))
        - (thr + x) * normal_pdf(a)
        - (thr - x) * normal_pdf(thr + x)
    )
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FixedPointResult:
    tau: float
    iterations: int
    residual: float


def state_evolution_map(tau: float, epsilon: float, mu0: float, sigma0: float, delta: float, kappa: float) -> float:
    """One step ``tau -> sqrt(sigma0^2 + MSE(tau) / delta)``.

    Signal prior: ``mu0 * sigma0`` with probability ``epsilon``, else 0.
    Threshold: ``kappa * tau``.
    """
    if tau <= 0:
        return sigma0
    theta = mu0 * sigma0
    mse = (1.0 - epsilon) * soft_threshold_risk(0.0, kappa)
    if epsilon > 0:
        mse += epsilon * soft_threshold_risk(theta / tau, kappa)
    return math.sqrt(sigma0**2 + tau**2 * mse / delta)


def state_evolution_tau(
    epsilon: float,
    mu0: float,
    sigma0: float,
    delta: float,
    kappa: float,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> FixedPointResult:
    """Iterate the state-evolution map to its fixed point.

    Raises :class:`NoFixedPointError` if ``tau`` exceeds ``1e6 * sigma0`` or
    the iteration does not settle within ``max_iter`` steps.
    """
    if not (sigma0 > 0 and delta > 0 and kappa > 0):
        raise InvalidParameterError("sigma0, delta and kappa must be positive")
    if not 0.0 <= epsilon <= 1.0 or mu0 < 0:
        raise InvalidParameterError("need 0 <= epsilon <= 1 and mu0 >= 0")
    theta = mu0 * sigma0
    tau = math.sqrt(sigma0**2 + epsilon * theta**2 / delta)
    for it in range(1, max_iter + 1):
        nxt = state_evolution_map(tau, epsilon, mu0, sigma0, delta, kappa)
        step = abs(nxt - tau)
        tau = nxt
        if tau > 1e6 * sigma0:
            raise NoFixedPointError(f"state evolution diverged (tau = {tau:.3e})")
        if step <= tol:
            residual = abs(state_evolution_map(tau, epsilon, mu0, sigma0, delta, kappa) - tau)
            return FixedPointResult(tau=tau, iterations=it, residual=residual)
    raise NoFixedPointError(f"state evolution did not settle in {max_iter} iterations (last step {step:.3e})")


# --------------------------------------------------------------------------
# Upper bounds on achievable power
# --------------------------------------------------------------------------


def chi2_survival(k: int, x: float) -> float:
    """``P(chi^2_k >= x)`` as the regularized upper incomplete gamma ``Q(k/2, x/2)``."""
    if k < 1:
        raise InvalidParameterError(f"degrees of freedom must be >= 1, got {k}")
    if x <= 0:
        return 1.0
    return float(special.gammaincc(0.5 * k, 0.5 * x))


def conditional_variance(Sigma, i: int, S: Sequence[int]) -> float:
    """``Sigma_ii - Sigma_iS Sigma_SS^{-1} Sigma_Si``."""
    Sigma = np.asarray(Sigma, dtype=float)
    S = list(S)
    if not S:
        return float(Sigma[i, i])
    sss = Sigma[np.ix_(S, S)]
    sis = Sigma[i, S]
    try:
        factor = linalg.cho_factor(sss, lower=True)
    except linalg.LinAlgError as exc:
        raise linalg.LinAlgError("Sigma_SS is singular") from exc
    return float(Sigma[i, i] - sis @ linalg.cho_solve(factor, sis))


def _clamp01(v: float) -> float:
    return min(1.0, max(0.0, v))


def minimax_upper_bound(
    alpha: float,
    mu: float,
    sigma: float,
    Sigma,
    i: int,
    S: Sequence[int],
    s0: int,
    n: int,
    ell: float,
) -> float:
    """Upper bound on the minimax power of testing coordinate ``i``.

    ``G(alpha, mu / sigma_eff) + P(chi^2_{n-s0+1} >= n - s0 + ell)`` with
    ``sigma_eff = sigma / sqrt(Sigma_{i|S} (n - s0 + ell))``, clamped to [0, 1].
    """
    S = list(S)
    if len(S) >= s0:
        raise InvalidParameterError(f"need |S| < s0, got |S|={len(S)}, s0={s0}")
    if i in S:
        raise InvalidParameterError("i must not belong to S")
    dof_arg = n - s0 + ell
    if dof_arg <= 0:
        raise InvalidParameterError(f"n - s0 + ell must be positive, got {dof_arg}")
    cond = conditional_variance(Sigma, i, S)
    sigma_eff = sigma / math.sqrt(cond * dof_arg)
    bound = G(alpha, mu / sigma_eff) + chi2_survival(n - s0 + 1, dof_arg)
    return _clamp01(bound)


def ell_grid(n: int, s0: int, count: int = 11) -> np.ndarray:
    """``0, sqrt(n - s0), 2 sqrt(n - s0), ...``."""
    return math.sqrt(n - s0) * np.arange(count)


def best_minimax_upper_bound(alpha, mu, sigma, Sigma, i, S, s0, n, ells: Optional[Iterable[float]] = None):
    """Smallest bound over ``ells``; returns ``(bound, ell)``."""
    if ells is None:
        ells = ell_grid(n, s0)
    best = None
    for ell in ells:
        b = minimax_upper_bound(alpha, mu, sigma, Sigma, i, S, s0, n, float(ell))
        if best is None or b < best[0]:
            best = (b, float(ell))
    return best


def corollary1_bound(alpha: float, mu: float, sigma: float, n: int, s0: int, xi: float) -> float:
    """Standard-design bound ``G(alpha, mu (sqrt(n-s0+1) + xi) / sigma) + exp(-xi^2/8)``."""
    root = math.sqrt(n - s0 + 1)
    if not 0.0 <= xi <= 1.5 * root:
        raise InvalidParameterError(f"xi must lie in [0, {1.5 * root:.4g}], got {xi}")
    return _clamp01(G(alpha, mu * (root + xi) / sigma) + math.exp(-(xi**2) / 8.0))


def best_corollary1_bound(alpha, mu, sigma, n, s0, points: int = 301):
    """Smallest standard-design bound over an even grid of admissible ``xi``."""
    top = 1.5 * math.sqrt(n - s0 + 1)
    best = None
    for xi in np.linspace(0.0, top, points):
        b = corollary1_bound(alpha, mu, sigma, n, s0, float(xi))
        if best is None or b < best[0]:
            best = (b, float(xi))
    return best


def oracle_power(X, i: int, S: Sequence[int], mu: float, sigma: float, alpha: float) -> float:
    """Power of the test that knows the rest of the support: ``G(alpha, mu ||P_S^perp x_i|| / sigma)``."""
    X = np.asarray(X, dtype=float)
    S = list(S)
    if i in S:
        raise InvalidParameterError("i must not belong to S")
    x = X[:, i]
    if S:
        Q, R = linalg.qr(X[:, S], mode="economic")
        diag = np.abs(np.diag(R))
        if diag.min() <= 1e-12 * max(1.0, diag.max()):
            raise linalg.LinAlgError("columns indexed by S are linearly dependent")
        x = x - Q @ (Q.T @ x)
    return G(alpha, mu * float(np.linalg.norm(x)) / sigma)


def power_curve(epsilon: float, delta: float, mu0: float, alphas: Iterable[float]):
    """Rows ``(alpha, G(alpha, mu0 / tau_*), degenerate)``.

    ``degenerate`` is True when ``tau_*`` is infinite, in which case every row
    is ``(alpha, alpha)``.
    """
    ts = tau_star(epsilon, delta)
    rows = []
    for a in alphas:
        if math.isinf(ts):
            rows.append((float(a), float(a), True))
        else:
            rows.append((float(a), G(float(a), mu0 / ts), False))
    return rows
