"""Problem instances for the Gaussian random-design linear model.

An instance is ``y = X @ theta0 + w`` with rows of ``X`` drawn i.i.d. from
``N(0, Sigma)`` and ``w ~ N(0, sigma^2 I)``.  Covariance models are small
value objects that know how to realize themselves as a dense matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .exceptions import InvalidCovarianceError, InvalidParameterError

_SYM_TOL = 1e-10


@dataclass(frozen=True)
class CovarianceModel:
    """Row covariance of the design.

    ``kind`` is one of ``"identity"``, ``"circulant"`` or ``"dense"``.  Use the
    classmethod constructors rather than building one by hand.
    """

    kind: str
    band: int = 0
    off: float = 0.0
    matrix: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    @classmethod
    def identity(cls) -> "CovarianceModel":
        return cls("identity")

    @classmethod
    def circulant(cls, band: int, off: float) -> "CovarianceModel":
        if band < 1:
            raise InvalidCovarianceError(f"circulant band must be positive, got {band}")
        return cls("circulant", band=int(band), off=float(off))

    @classmethod
    def dense(cls, matrix) -> "CovarianceModel":
        m = np.array(matrix, dtype=float)
        _check_dense(m)
        m.setflags(write=False)
        return cls("dense", matrix=m)

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity"


def _check_dense(m: np.ndarray) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidCovarianceError(f"covariance must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidCovarianceError("covariance has non-finite entries")
    if np.max(np.abs(m - m.T), initial=0.0) > _SYM_TOL:
        raise InvalidCovarianceError("covariance is not symmetric")
    try:
        linalg.cholesky(m, lower=True)
    except linalg.LinAlgError as exc:
        raise InvalidCovarianceError("covariance is not positive definite") from exc


def build_covariance(model: CovarianceModel, p: int) -> np.ndarray:
    """Dense ``p x p`` realization of ``model``."""
    if p < 1:
        raise InvalidParameterError(f"p must be >= 1, got {p}")
    if model.kind == "identity":
        return np.eye(p)
    if model.kind == "circulant":
        if 2 * model.band >= p:
            raise InvalidCovarianceError(
                f"circulant band {model.band} too wide for p={p} (need 2*band < p)"
            )
        idx = np.arange(p)
        lag = np.abs(idx[:, None] - idx[None, :])
        lag = np.minimum(lag, p - lag)
        sigma = np.where((lag > 0) & (lag <= model.band), model.off, 0.0)
        np.fill_diagonal(sigma, 1.0)
        try:
            linalg.cholesky(sigma, lower=True)
        except linalg.LinAlgError as exc:
            raise InvalidCovarianceError(
                f"circulant(band={model.band}, off={model.off}) is not positive definite at p={p}"
            ) from exc
        return sigma
    if model.kind == "dense":
        if model.matrix.shape != (p, p):
            raise InvalidCovarianceError(
                f"dense covariance has shape {model.matrix.shape}, expected {(p, p)}"
            )
        return np.array(model.matrix)
    raise InvalidCovarianceError(f"unknown covariance kind {model.kind!r}")


def covariance_factor(model: CovarianceModel, p: int) -> Optional[np.ndarray]:
    """Lower-triangular ``L`` with ``L @ L.T == Sigma``; ``None`` for identity."""
    if model.is_identity:
        return None
    return linalg.cholesky(build_covariance(model, p), lower=True)


def precision_matrix(model: CovarianceModel, p: int) -> Optional[np.ndarray]:
    """Exact ``Sigma^{-1}``, or ``None`` for the identity model."""
    if model.is_identity:
        return None
    sigma = build_covariance(model, p)
    factor = linalg.cho_factor(sigma, lower=True)
    prec = linalg.cho_solve(factor, np.eye(p))
    return 0.5 * (prec + prec.T)


@dataclass(frozen=True)
class SignalSpec:
    """``s0`` active coordinates, chosen uniformly without replacement, all equal to ``mu``."""

    p: int
    s0: int
    mu: float = 0.0

    def __post_init__(self):
        if self.p < 1:
            raise InvalidParameterError(f"p must be >= 1, got {self.p}")
        if not 0 <= self.s0 <= self.p:
            raise InvalidParameterError(f"s0 must lie in [0, p], got {self.s0}")
        if self.s0 > 0 and not self.mu > 0:
            raise InvalidParameterError(f"mu must be positive when s0 > 0, got {self.mu}")


@dataclass(frozen=True)
class Instance:
    X: np.ndarray
    theta0: np.ndarray
    sigma: float
    w: np.ndarray
    y: np.ndarray
    seed: int
    covariance: CovarianceModel = field(default_factory=CovarianceModel.identity)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.theta0)


@dataclass(frozen=True)
class ScalingParams:
    """Asymptotic-regime summary of an instance.

    ``mu0`` is ``None`` when it is undefined (no noise or no signal).
    """

    delta: float
    epsilon: float
    sigma0: float
    mu0: Optional[float]


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; replicate ``r`` of an experiment uses ``base_seed + r``."""
    return np.random.Generator(np.random.Philox(int(seed)))


def sample_instance(
    model: CovarianceModel,
    signal: SignalSpec,
    n: int,
    sigma: float,
    seed: int,
    factor: Optional[np.ndarray] = None,
) -> Instance:
    """Draw one instance.

    ``factor`` may carry a precomputed lower Cholesky factor of the covariance
    so that replicates of one configuration factor it only once.
    """
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be >= 0, got {sigma}")
    p = signal.p
    if factor is None:
        factor = covariance_factor(model, p)
    rng = make_rng(seed)

    X = rng.standard_normal((n, p))
    if factor is not None:
        X = X @ factor.T

    theta0 = np.zeros(p)
    if signal.s0:
        support = rng.choice(p, size=signal.s0, replace=False)
        theta0[support] = signal.mu

    w = sigma * rng.standard_normal(n)
    y = X @ theta0 + w
    for arr in (X, theta0, w, y):
        arr.setflags(write=False)
    return Instance(X=X, theta0=theta0, sigma=float(sigma), w=w, y=y, seed=int(seed), covariance=model)


def scaling_of(instance: Instance) -> ScalingParams:
    n, p = instance.X.shape
    s0 = int(np.count_nonzero(instance.theta0))
    sigma = instance.sigma
    mu0 = None
    if sigma > 0 and s0 > 0:
        mu = float(np.min(np.abs(instance.theta0[instance.theta0 != 0])))
        mu0 = mu * math.sqrt(n) / sigma
    return ScalingParams(delta=n / p, epsilon=s0 / p, sigma0=sigma / math.sqrt(n), mu0=mu0)
