"""Monte Carlo replicates of the SDL-test on synthetic designs."""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..covest import estimate_covariance, invert_covariance
from ..exceptions import SDLTestError
from ..inference import evaluate
from ..model import covariance_factor, precision_matrix, sample_instance
from ..procedure import sdl_test
from ..theory import G, epsilon_bar, minimax_threshold_kappa, power_curve, tau_star
from .config import ExperimentConfig


@dataclass
class LevelResult:
    alpha: float
    type_I: Optional[float]
    power: Optional[float]
    theory: Optional[float]


@dataclass
class ReplicateResult:
    replicate: int
    seed: int
    status: str = "ok"
    error: str = ""
    lam: float = math.nan
    d: float = math.nan
    tau: float = math.nan
    support_size: int = -1
    ridge: float = 0.0
    kkt_gap: float = math.nan
    levels: list = field(default_factory=list)
    z_scores: Optional[np.ndarray] = None
    active: Optional[np.ndarray] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class Aggregate:
    alpha: float
    replicates_ok: int
    type_I_mean: Optional[float]
    type_I_std: Optional[float]
    power_mean: Optional[float]
    power_std: Optional[float]
    theory_mean: Optional[float]
    theory_std: Optional[float]


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    replicates: list
    aggregates: list
    extra: dict = field(default_factory=dict)

    def aggregate(self, alpha: float) -> Aggregate:
        for agg in self.aggregates:
            if math.isclose(agg.alpha, alpha):
                return agg
        raise KeyError(alpha)

    @property
    def failed(self) -> list:
        return [r for r in self.replicates if not r.ok]


def _mean_std(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    mean = math.fsum(vals) / len(vals)
    std = statistics.stdev(vals) if len(vals) > 1 else 0.0
    return mean, std


def aggregate(replicates: Sequence[ReplicateResult], alphas: Sequence[float]) -> list:
    """Per-level mean and sample standard deviation over successful replicates."""
    out = []
    ok = [r for r in replicates if r.ok]
    for k, alpha in enumerate(alphas):
        levels = [r.levels[k] for r in ok]
        t1 = _mean_std([lv.type_I for lv in levels])
        pw = _mean_std([lv.power for lv in levels])
        th = _mean_std([lv.theory for lv in levels])
        out.append(Aggregate(alpha, len(ok), *t1, *pw, *th))
    return out


def resolve_kappa(config: ExperimentConfig) -> Optional[float]:
    if config.lambda_mode == "fixed":
        return None
    if config.kappa is not None:
        return config.kappa
    if config.kappa_source == "true_epsilon":
        if config.s0 == 0:
            raise SDLTestError("kappa_source=true_epsilon needs s0 > 0")
        return minimax_threshold_kappa(config.s0 / config.p)
    return minimax_threshold_kappa(epsilon_bar(config.n / config.p))


def _theory_standard(config: ExperimentConfig, alpha: float) -> Optional[float]:
    """``G(alpha, mu0 / tau_*)`` at the true sparsity."""
    if config.s0 == 0 or config.sigma == 0:
        return None
    mu0 = config.mu * math.sqrt(config.n) / config.sigma
    ts = tau_star(config.s0 / config.p, config.n / config.p)
    return G(alpha, 0.0 if math.isinf(ts) else mu0 / ts)


def _run_replicate(config: ExperimentConfig, replicate: int, factor, exact_precision, kappa) -> ReplicateResult:
    seed = config.seed_of(replicate)
    result = ReplicateResult(replicate=replicate, seed=seed)
    try:
        inst = sample_instance(config.covariance, config.signal, config.n, config.sigma, seed, factor=factor)
        mode = config.resolved_precision_mode
        precision = None
        if mode == "exact":
            precision = exact_precision
        elif mode == "estimated":
            est_cov = estimate_covariance(inst.X)
            inv = invert_covariance(est_cov.sigma_hat)
            precision, result.ridge = inv.precision, inv.ridge
        run = sdl_test(
            inst.X,
            inst.y,
            alpha=config.alpha_levels[0],
            precision=precision,
            lam=config.lam if config.lambda_mode == "fixed" else None,
            kappa=kappa,
            calibration_tol=config.calibration_tol,
        )
    except SDLTestError as exc:
        result.status = "failed"
        result.error = f"{type(exc).__name__}: {exc}"
        return result

    est = run.estimate
    result.lam, result.d, result.tau = run.fit.lam, est.d, est.tau
    result.support_size, result.kkt_gap = run.fit.support_size, run.fit.kkt_gap
    result.z_scores = run.report.z_scores
    result.active = inst.theta0 != 0
    standard = config.covariance.is_identity and precision is None
    omega_diag = np.ones(config.p) if precision is None else np.diag(precision)
    for alpha in config.alpha_levels:
        summary = evaluate(run.report.at_level(alpha), inst.theta0)
        theory = None
        if config.s0 > 0:
            if standard:
                theory = _theory_standard(config, alpha)
            else:
                worst = float(np.max(omega_diag[result.active]))
                theory = G(alpha, config.mu / (est.tau * math.sqrt(worst)))
        result.levels.append(LevelResult(alpha, summary.type_I, summary.power, theory))
    return result


def run_synthetic(config: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """Run every replicate and collate in replicate order.

    Replicate ``r`` draws its instance from seed ``base_seed + r``; results do
    not depend on ``workers``.
    """
    factor = covariance_factor(config.covariance, config.p)
    exact = None
    if config.resolved_precision_mode == "exact":
        exact = precision_matrix(config.covariance, config.p)
    kappa = resolve_kappa(config)
    indices = range(config.replicates)
    if workers > 1 and config.replicates > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_replicate, config, r, factor, exact, kappa) for r in indices]
            replicates = [f.result() for f in futures]
    else:
        replicates = [_run_replicate(config, r, factor, exact, kappa) for r in indices]
    extra = {"kappa": kappa}
    if config.s0 > 0 and config.sigma > 0:
        extra["epsilon"] = config.s0 / config.p
        extra["delta"] = config.n / config.p
        extra["mu0"] = config.mu * math.sqrt(config.n) / config.sigma
    return ExperimentReport(
        kind="synthetic",
        config=config.to_dict(),
        replicates=replicates,
        aggregates=aggregate(replicates, config.alpha_levels),
        extra=extra,
    )


def emit_power_curve(epsilon: float, delta: float, mu0: float, alpha_grid) -> list:
    """Rows ``(alpha, G(alpha, mu0 / tau_*), degenerate)`` of the asymptotic power curve."""
    return power_curve(epsilon, delta, mu0, alpha_grid)
