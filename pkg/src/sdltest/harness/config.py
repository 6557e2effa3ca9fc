"""Experiment configuration and its plain-text key/value file format.

A config file is UTF-8 text, one ``key = value`` per line; ``#`` starts a
comment.  Recognized keys::

    p, n, s0, mu, sigma
    covariance.kind        identity | circulant | dense
    covariance.band, covariance.off        (circulant)
    covariance.path                        (dense; header-free CSV)
    seed, replicates, workers
    alpha                  comma-separated levels, e.g. 0.025, 0.05
    lambda.mode            calibrated | fixed
    lambda.kappa_source    epsilon_bar | true_epsilon
    lambda.kappa           explicit kappa (overrides kappa_source)
    lambda.value           lambda for fixed mode
    precision              exact | estimated | identity
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..exceptions import ConfigError
from ..model import CovarianceModel, SignalSpec

LAMBDA_MODES = ("calibrated", "fixed")
KAPPA_SOURCES = ("epsilon_bar", "true_epsilon")
PRECISION_MODES = ("exact", "estimated", "identity")


@dataclass(frozen=True)
class ExperimentConfig:
    p: int
    n: int
    s0: int
    mu: float
    sigma: float = 1.0
    covariance: CovarianceModel = field(default_factory=CovarianceModel.identity)
    alpha_levels: tuple = (0.05,)
    replicates: int = 10
    lambda_mode: str = "calibrated"
    kappa_source: str = "epsilon_bar"
    kappa: Optional[float] = None
    lam: Optional[float] = None
    precision_mode: Optional[str] = None
    base_seed: int = 0
    calibration_tol: float = 1e-4

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if not self.alpha_levels:
            raise ConfigError("at least one alpha level is required")
        for a in self.alpha_levels:
            if not 0 < a < 1:
                raise ConfigError(f"alpha levels must lie in (0, 1), got {a}")
        if self.lambda_mode not in LAMBDA_MODES:
            raise ConfigError(f"lambda.mode must be one of {LAMBDA_MODES}")
        if self.lambda_mode == "fixed" and (self.lam is None or self.lam < 0):
            raise ConfigError("fixed lambda mode needs a non-negative lambda.value")
        if self.kappa_source not in KAPPA_SOURCES:
            raise ConfigError(f"lambda.kappa_source must be one of {KAPPA_SOURCES}")
        if self.kappa is not None and not self.kappa > 0:
            raise ConfigError("lambda.kappa must be positive")
        if self.precision_mode is not None and self.precision_mode not in PRECISION_MODES:
            raise ConfigError(f"precision must be one of {PRECISION_MODES}")
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        try:
            SignalSpec(self.p, self.s0, self.mu)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def signal(self) -> SignalSpec:
        return SignalSpec(self.p, self.s0, self.mu)

    @property
    def resolved_precision_mode(self) -> str:
        if self.precision_mode is not None:
            return self.precision_mode
        return "identity" if self.covariance.is_identity else "exact"

    def seed_of(self, replicate: int) -> int:
        return self.base_seed + replicate

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "covariance"}
        out["alpha_levels"] = list(self.alpha_levels)
        cov = self.covariance
        out["covariance"] = {"kind": cov.kind}
        if cov.kind == "circulant":
            out["covariance"].update(band=cov.band, off=cov.off)
        out["precision_mode"] = self.resolved_precision_mode
        return out


def parse_keyvalue(text: str) -> dict:
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        entries[key] = value
    return entries


def _num(entries, key, kind, default=None):
    if key not in entries:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return kind(entries[key])
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse {entries[key]!r} as {kind.__name__}") from exc


def parse_alpha(value) -> tuple:
    try:
        return tuple(float(a) for a in str(value).split(",") if a.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse alpha levels {value!r}") from exc


def covariance_from_entries(entries: dict, base: Optional[Path] = None) -> CovarianceModel:
    kind = entries.get("covariance.kind", "identity").lower()
    if kind == "identity":
        return CovarianceModel.identity()
    if kind == "circulant":
        return CovarianceModel.circulant(_num(entries, "covariance.band", int), _num(entries, "covariance.off", float))
    if kind == "dense":
        if "covariance.path" not in entries:
            raise ConfigError("dense covariance needs covariance.path")
        path = Path(entries["covariance.path"])
        if base is not None and not path.is_absolute():
            path = base / path
        return CovarianceModel.dense(read_matrix_csv(path))
    raise ConfigError(f"unknown covariance.kind {kind!r}")


_KNOWN = {
    "p", "n", "s0", "mu", "sigma", "seed", "replicates", "workers", "alpha",
    "covariance.kind", "covariance.band", "covariance.off", "covariance.path",
    "lambda.mode", "lambda.kappa_source", "lambda.kappa", "lambda.value", "precision",
}


def config_from_entries(entries: dict, base: Optional[Path] = None) -> ExperimentConfig:
    unknown = set(entries) - _KNOWN
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    s0 = _num(entries, "s0", int, 0)
    return ExperimentConfig(
        p=_num(entries, "p", int),
        n=_num(entries, "n", int),
        s0=s0,
        mu=_num(entries, "mu", float, 0.0),
        sigma=_num(entries, "sigma", float, 1.0),
        covariance=covariance_from_entries(entries, base),
        alpha_levels=parse_alpha(entries.get("alpha", "0.05")),
        replicates=_num(entries, "replicates", int, 10),
        lambda_mode=entries.get("lambda.mode", "calibrated"),
        kappa_source=entries.get("lambda.kappa_source", "epsilon_bar"),
        kappa=_num(entries, "lambda.kappa", float) if "lambda.kappa" in entries else None,
        lam=_num(entries, "lambda.value", float) if "lambda.value" in entries else None,
        precision_mode=entries.get("precision"),
        base_seed=_num(entries, "seed", int, 0),
    )


def load_config(path) -> tuple[ExperimentConfig, dict]:
    """Parse a config file; returns the config and the raw entries."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    entries = parse_keyvalue(text)
    return config_from_entries(entries, base=path.parent), entries


def read_matrix_csv(path) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read matrix CSV {path}: {exc}") from exc


def write_matrix_csv(path, matrix) -> None:
    np.savetxt(path, np.asarray(matrix), delimiter=",", fmt="%.17g")
