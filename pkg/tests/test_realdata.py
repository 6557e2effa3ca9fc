import math

import numpy as np
import pytest
from scipy import stats

from sdltest.exceptions import ConfigError
from sdltest.harness.realdata import (
    RealDataConfig,
    drop_to_full_rank,
    impute_column_means,
    load_table,
    normalize_columns,
    prepare,
    run_realdata,
)
from sdltest.procedure import sdl_test


def write_table(path, n=400, p=150, seed=0, missing=0.02, header=False):
    """Five label columns, ``p`` predictors (last one a copy of the first), response last."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    X[:, -1] = X[:, 0]
    beta = np.zeros(p)
    beta[1:6] = 0.6
    y = X @ beta + 0.5 * rng.standard_normal(n)
    lines = []
    if header:
        lines.append(",".join(["state", "county", "community", "name", "fold"] + [f"v{j}" for j in range(p)] + ["target"]))
    for i in range(n):
        cells = [f"{v:.12g}" if rng.random() > missing else "?" for v in X[i]]
        lines.append(",".join(["8", "?", "x", f"town{i}", "1"] + cells + [f"{y[i]:.12g}"]))
    path.write_text("\n".join(lines) + "\n")
    return X, y, beta


def test_load_table_parses_missing_and_skips_labels(tmp_path):
    path = tmp_path / "t.csv"
    write_table(path, n=20, p=6)
    table = load_table(path)
    assert table.X.shape == (20, 6) and table.y.shape == (20,)
    assert np.isnan(table.X).any()
    hpath = tmp_path / "h.csv"
    write_table(hpath, n=20, p=6, header=True)
    htable = load_table(hpath)
    assert htable.names[0] == "v0" and htable.X.shape == (20, 6)


def test_load_table_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_table(tmp_path / "nope.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,3\n1,2\n")
    with pytest.raises(ConfigError):
        load_table(bad, skip_cols=())
    miss = tmp_path / "miss.csv"
    miss.write_text("1,2,?\n1,2,3\n")
    with pytest.raises(ConfigError):
        load_table(miss, skip_cols=())


def test_imputation_uses_observed_column_means():
    X = np.array([[1.0, np.nan, np.nan], [3.0, 4.0, np.nan], [np.nan, 8.0, np.nan]])
    out, empty = impute_column_means(X)
    assert out[2, 0] == 2.0 and out[0, 1] == 6.0
    assert empty == [2]


def test_rank_reduction_drops_dependent_columns():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((50, 6))
    X[:, 4] = X[:, 1] + 2 * X[:, 2]
    X[:, 5] = X[:, 0]
    dropped = drop_to_full_rank(X)
    assert len(dropped) == 2
    kept = [j for j in range(6) if j not in dropped]
    assert np.linalg.matrix_rank(X[:, kept]) == 4


def test_normalization():
    rng = np.random.default_rng(2)
    Xn = normalize_columns(rng.standard_normal((30, 4)) * 5 + 3)
    assert np.allclose(Xn.mean(axis=0), 0, atol=1e-14)
    assert np.allclose(np.linalg.norm(Xn, axis=0), math.sqrt(30))
    with pytest.raises(ConfigError):
        normalize_columns(np.ones((5, 2)))


def test_prepare_recovers_generating_support(tmp_path):
    path = tmp_path / "t.csv"
    write_table(path, missing=0.0)
    prep = prepare(load_table(path), active_threshold=0.2)
    assert prep.X.shape == (400, 149)
    assert prep.dropped in (["x5"], ["x154"])
    # theta0 is the least-squares fit, so the residual is orthogonal to X
    assert np.max(np.abs(prep.X.T @ (prep.y - prep.X @ prep.theta0))) < 1e-8
    active_names = {prep.names[j] for j in np.flatnonzero(prep.active)}
    assert active_names == {f"x{c}" for c in range(6, 11)}


def test_infinite_threshold_has_no_power(tmp_path):
    path = tmp_path / "t.csv"
    write_table(path)
    cfg = RealDataConfig(data_path=str(path), active_threshold=math.inf, replicates=4, alpha_levels=(0.05,))
    rep = run_realdata(cfg)
    agg = rep.aggregates[0]
    assert agg.power_mean is None
    assert agg.type_I_mean <= 0.05 + 0.1
    assert rep.extra["active_columns"] == []


def test_run_realdata_end_to_end(tmp_path):
    path = tmp_path / "t.csv"
    write_table(path)
    cfg = RealDataConfig(data_path=str(path), active_threshold=0.2, replicates=5, subsample_n=120)
    rep = run_realdata(cfg)
    assert not rep.failed
    # imputing different cells breaks the exact copy, so no column is dropped
    assert rep.extra["n_total"] == 400 and rep.extra["p"] == 150
    agg = rep.aggregate(0.05)
    assert agg.type_I_mean <= 0.15
    assert agg.power_mean >= 0.5
    again = run_realdata(cfg)
    assert [r.lam for r in again.replicates] == [r.lam for r in rep.replicates]


def test_realdata_config_errors(tmp_path):
    path = tmp_path / "t.csv"
    write_table(path, n=60, p=10)
    with pytest.raises(ConfigError):
        run_realdata(RealDataConfig(data_path=str(path), subsample_n=100))
    with pytest.raises(ConfigError):
        RealDataConfig(data_path=str(path), subsample_n=1)
    with pytest.raises(ConfigError):
        RealDataConfig(data_path=str(path), alpha_levels=(0.0,))


def test_full_sample_small_lambda_reproduces_least_squares(tmp_path):
    path = tmp_path / "t.csv"
    X, _, beta = write_table(path, n=1000, p=151, missing=0.0, seed=4)
    prep = prepare(load_table(path), active_threshold=0.04)
    run = sdl_test(prep.X, prep.y, lam=1e-6)
    assert np.max(np.abs(run.fit.theta_hat - prep.theta0)) < 1e-3
    # keep columns whose generating coefficient is zero (x0 and its copy excluded)
    null_names = {f"x{c}" for c in range(5 + 11, 5 + 150)}
    nulls = [j for j, name in enumerate(prep.names) if name in null_names]
    assert len(nulls) == 139
    ks = stats.kstest(run.report.p_values[nulls], "uniform")
    assert ks.pvalue > 0.01


def test_subsample_too_large_for_default_kappa(tmp_path):
    path = tmp_path / "t.csv"
    write_table(path, p=40)
    with pytest.raises(ConfigError):
        run_realdata(RealDataConfig(data_path=str(path), subsample_n=100))
