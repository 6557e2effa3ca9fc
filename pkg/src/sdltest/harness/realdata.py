"""SDL-test on a real regression table with a least-squares ground truth.

Pipeline:

1. impute each missing entry with its column mean;
2. drop columns one at a time (smallest pivot of a column-pivoted QR of the
   centered matrix) until the design has full column rank;
3. center each column and scale it to l2 norm ``sqrt(n_tot)``;
4. take ``theta0`` as the least-squares fit on all rows and call coordinates
   with ``|theta0_i| > active_threshold`` active;
5. for each replicate, subsample rows without replacement and run the
   SDL-test with a thresholded covariance estimate.

The default layout matches the UCI "Communities and Crime" file: no header,
``?`` for missing values, five non-predictive leading columns and the
response in the last column.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import linalg

from ..covest import estimate_covariance, invert_covariance
from ..exceptions import ConfigError, SDLTestError
from ..inference import evaluate
from ..model import make_rng
from ..procedure import default_kappa, sdl_test
from .experiments import ExperimentReport, LevelResult, ReplicateResult, aggregate

NA_TOKENS = ("", "?", "NA", "nan", "NaN")


@dataclass(frozen=True)
class RealDataConfig:
    data_path: str
    subsample_n: int = 84
    active_threshold: float = 0.04
    alpha_levels: tuple = (0.01, 0.025, 0.05)
    replicates: int = 20
    base_seed: int = 0
    response_col: int = -1
    skip_cols: tuple = (0, 1, 2, 3, 4)
    header: Optional[bool] = None
    rank_tol: float = 1e-8
    lam: Optional[float] = None
    kappa: Optional[float] = None

    def __post_init__(self):
        if self.subsample_n < 2:
            raise ConfigError("subsample_n must be >= 2")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        for a in self.alpha_levels:
            if not 0 < a < 1:
                raise ConfigError(f"alpha levels must lie in (0, 1), got {a}")

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["alpha_levels"] = list(self.alpha_levels)
        out["skip_cols"] = list(self.skip_cols)
        return out


@dataclass
class Table:
    X: np.ndarray  # may contain NaN
    y: np.ndarray
    names: list


def _to_float(tok: str) -> float:
    tok = tok.strip()
    if tok in NA_TOKENS:
        return math.nan
    return float(tok)


def load_table(path, response_col=-1, skip_cols=(0, 1, 2, 3, 4), header=None) -> Table:
    """Read a comma-separated table into predictors (NaN for missing) and response."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise ConfigError(f"cannot read data file {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"data file {path} is empty")
    width = len(rows[0])
    resp = response_col % width
    skip = {c % width for c in skip_cols}
    if resp in skip:
        raise ConfigError("response column is also listed as skipped")
    keep = [c for c in range(width) if c != resp and c not in skip]
    if header is None:
        try:
            _to_float(rows[0][resp])
            header = False
        except ValueError:
            header = True
    names = [rows[0][c].strip() for c in keep] if header else [f"x{c}" for c in keep]
    body = rows[1:] if header else rows
    X = np.empty((len(body), len(keep)))
    y = np.empty(len(body))
    for r, row in enumerate(body):
        if len(row) != width:
            raise ConfigError(f"row {r + 1 + header} has {len(row)} fields, expected {width}")
        try:
            y[r] = _to_float(row[resp])
            X[r] = [_to_float(row[c]) for c in keep]
        except ValueError as exc:
            raise ConfigError(f"row {r + 1 + header}: {exc}") from exc
    if np.isnan(y).any():
        raise ConfigError("response column has missing values")
    return Table(X=X, y=y, names=names)


@dataclass
class Prepared:
    X: np.ndarray
    y: np.ndarray
    names: list
    dropped: list
    theta0: np.ndarray
    active: np.ndarray = field(default=None)


def impute_column_means(X) -> tuple[np.ndarray, list]:
    """Fill NaNs with column means; columns with no observed values are reported for removal."""
    X = np.array(X, dtype=float)
    empty = []
    for j in range(X.shape[1]):
        col = X[:, j]
        miss = np.isnan(col)
        if miss.all():
            empty.append(j)
            continue
        if miss.any():
            col[miss] = col[~miss].mean()
    return X, empty


def drop_to_full_rank(X, rank_tol: float = 1e-8) -> list:
    """Indices of columns to remove so the remaining ones are linearly independent.

    Greedy: the column that a column-pivoted QR places last is removed while
    its pivot is below ``rank_tol`` times the largest pivot.
    """
    keep = list(range(X.shape[1]))
    dropped = []
    while keep:
        _, R, piv = linalg.qr(X[:, keep], mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        if diag.size == len(keep) and diag[-1] > rank_tol * diag[0]:
            break
        worst = keep[piv[-1]]
        keep.remove(worst)
        dropped.append(worst)
    return sorted(dropped)


def normalize_columns(X) -> np.ndarray:
    """Center each column and scale it to l2 norm ``sqrt(n)``."""
    n = X.shape[0]
    Xc = X - X.mean(axis=0)
    norms = np.linalg.norm(Xc, axis=0)
    if np.any(norms == 0):
        raise ConfigError("constant column survived rank reduction")
    return Xc * (math.sqrt(n) / norms)


def prepare(table: Table, active_threshold: float, rank_tol: float = 1e-8) -> Prepared:
    X, empty = impute_column_means(table.X)
    names = list(table.names)
    alive = [j for j in range(X.shape[1]) if j not in empty]
    Xa = X[:, alive]
    centered = Xa - Xa.mean(axis=0)
    drop_local = drop_to_full_rank(centered, rank_tol)
    kept = [alive[j] for j in range(len(alive)) if j not in set(drop_local)]
    dropped = sorted(empty + [alive[j] for j in drop_local])
    if not kept:
        raise ConfigError("no columns left after rank reduction")
    Xn = normalize_columns(X[:, kept])
    if Xn.shape[0] <= Xn.shape[1]:
        raise ConfigError("need more rows than retained columns for the least-squares ground truth")
    y = table.y - table.y.mean()
    theta0, *_ = np.linalg.lstsq(Xn, y, rcond=None)
    active = np.abs(theta0) > active_threshold
    return Prepared(
        X=Xn,
        y=y,
        names=[names[j] for j in kept],
        dropped=[names[j] for j in dropped],
        theta0=theta0,
        active=active,
    )


def _replicate(prep: Prepared, config: RealDataConfig, r: int) -> ReplicateResult:
    seed = config.base_seed + r
    res = ReplicateResult(replicate=r, seed=seed)
    rng = make_rng(seed)
    rows = np.sort(rng.choice(prep.X.shape[0], size=config.subsample_n, replace=False))
    Xs = prep.X[rows]
    ys = prep.y[rows] - prep.y[rows].mean()
    try:
        inv = invert_covariance(estimate_covariance(Xs).sigma_hat)
        kappa = None
        if config.lam is None:
            kappa = config.kappa if config.kappa is not None else default_kappa(*Xs.shape)
        run = sdl_test(Xs, ys, alpha=config.alpha_levels[0], precision=inv.precision, lam=config.lam, kappa=kappa)
    except SDLTestError as exc:
        res.status = "failed"
        res.error = f"{type(exc).__name__}: {exc}"
        return res
    res.lam, res.d, res.tau = run.fit.lam, run.estimate.d, run.estimate.tau
    res.support_size, res.ridge, res.kkt_gap = run.fit.support_size, inv.ridge, run.fit.kkt_gap
    res.z_scores, res.active = run.report.z_scores, prep.active.copy()
    truth = prep.active.astype(float)
    for alpha in config.alpha_levels:
        s = evaluate(run.report.at_level(alpha), truth)
        res.levels.append(LevelResult(alpha, s.type_I, s.power, None))
    return res


def run_realdata(config: RealDataConfig) -> ExperimentReport:
    table = load_table(config.data_path, config.response_col, config.skip_cols, config.header)
    prep = prepare(table, config.active_threshold, config.rank_tol)
    if config.subsample_n > prep.X.shape[0]:
        raise ConfigError(f"subsample_n={config.subsample_n} exceeds the {prep.X.shape[0]} available rows")
    if config.lam is None and config.kappa is None:
        # fails early (as a config error) when n/p leaves the ballpark sparsity undefined
        default_kappa(config.subsample_n, prep.X.shape[1])
    reps = [_replicate(prep, config, r) for r in range(config.replicates)]
    extra = {
        "n_total": int(prep.X.shape[0]),
        "p": int(prep.X.shape[1]),
        "dropped_columns": prep.dropped,
        "active_columns": [prep.names[j] for j in np.flatnonzero(prep.active)],
        "data_file": Path(config.data_path).name,
    }
    return ExperimentReport(
        kind="realdata",
        config=config.to_dict(),
        replicates=reps,
        aggregates=aggregate(reps, config.alpha_levels),
        extra=extra,
    )
