import json
import math
import statistics

import numpy as np
import pytest

from sdltest.exceptions import ConfigError
from sdltest.harness.config import (
    ExperimentConfig,
    config_from_entries,
    load_config,
    parse_keyvalue,
    read_matrix_csv,
    write_matrix_csv,
)
from sdltest.harness.experiments import emit_power_curve, resolve_kappa, run_synthetic
from sdltest.harness.reporting import HIST_EDGES, write_report, zscore_histogram
from sdltest.model import CovarianceModel
from sdltest.theory import epsilon_bar, minimax_threshold_kappa

SMALL = dict(p=200, n=120, s0=5, mu=0.5, replicates=4, base_seed=10)


def test_parse_keyvalue_and_comments():
    text = "p = 10  # dimension\n\n# full comment\nn=5\ncovariance.kind = circulant\n"
    assert parse_keyvalue(text) == {"p": "10", "n": "5", "covariance.kind": "circulant"}
    with pytest.raises(ConfigError):
        parse_keyvalue("just a line\n")
    with pytest.raises(ConfigError):
        parse_keyvalue("= 3\n")


def test_config_from_entries():
    cfg = config_from_entries(
        {"p": "1000", "n": "600", "s0": "50", "mu": "0.1", "covariance.kind": "circulant",
         "covariance.band": "5", "covariance.off": "0.1", "alpha": "0.025, 0.05", "seed": "7"}
    )
    assert cfg.covariance == CovarianceModel.circulant(5, 0.1)
    assert cfg.alpha_levels == (0.025, 0.05)
    assert cfg.base_seed == 7 and cfg.seed_of(3) == 10
    assert cfg.resolved_precision_mode == "exact"
    assert config_from_entries({"p": "10", "n": "5"}).resolved_precision_mode == "identity"


@pytest.mark.parametrize(
    "entries",
    [
        {"n": "5"},
        {"p": "10", "n": "5", "bogus": "1"},
        {"p": "ten", "n": "5"},
        {"p": "10", "n": "5", "alpha": "0.05, 1.5"},
        {"p": "10", "n": "5", "lambda.mode": "fixed"},
        {"p": "10", "n": "5", "replicates": "0"},
        {"p": "10", "n": "5", "s0": "3", "mu": "0"},
        {"p": "10", "n": "5", "covariance.kind": "weird"},
        {"p": "10", "n": "5", "covariance.kind": "dense"},
        {"p": "10", "n": "5", "precision": "guess"},
    ],
)
def test_config_errors(entries):
    with pytest.raises(ConfigError):
        config_from_entries(entries)


def test_dense_covariance_from_csv(tmp_path):
    M = np.array([[1.0, 0.3], [0.3, 1.0]])
    write_matrix_csv(tmp_path / "sigma.csv", M)
    assert np.array_equal(read_matrix_csv(tmp_path / "sigma.csv"), M)
    (tmp_path / "exp.cfg").write_text("p = 2\nn = 5\ncovariance.kind = dense\ncovariance.path = sigma.csv\n")
    cfg, entries = load_config(tmp_path / "exp.cfg")
    assert cfg.covariance.kind == "dense" and np.array_equal(cfg.covariance.matrix, M)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


def test_kappa_resolution():
    cfg = ExperimentConfig(p=1000, n=600, s0=25, mu=0.1)
    assert resolve_kappa(cfg) == pytest.approx(minimax_threshold_kappa(epsilon_bar(0.6)))
    true_eps = ExperimentConfig(p=1000, n=600, s0=25, mu=0.1, kappa_source="true_epsilon")
    assert resolve_kappa(true_eps) == pytest.approx(minimax_threshold_kappa(0.025))
    assert resolve_kappa(ExperimentConfig(p=10, n=5, s0=0, mu=0, kappa=2.0)) == 2.0
    assert resolve_kappa(ExperimentConfig(p=10, n=5, s0=0, mu=0, lambda_mode="fixed", lam=0.1)) is None


def read_bytes(paths, roles=("report", "replicates", "zscores", "histogram")):
    return {r: paths[r].read_bytes() for r in roles}


def test_determinism_independent_of_worker_count(tmp_path):
    cfg = ExperimentConfig(**SMALL)
    a = write_report(run_synthetic(cfg, workers=1), tmp_path / "a")
    b = write_report(run_synthetic(cfg, workers=2), tmp_path / "b")
    c = write_report(run_synthetic(cfg, workers=1), tmp_path / "c")
    assert read_bytes(a) == read_bytes(b) == read_bytes(c)
    assert a["config"].read_text() == b["config"].read_text()


def test_aggregates_recompute_from_rows():
    cfg = ExperimentConfig(**SMALL, alpha_levels=(0.01, 0.05))
    rep = run_synthetic(cfg)
    assert not rep.failed
    for k, alpha in enumerate(cfg.alpha_levels):
        agg = rep.aggregate(alpha)
        t1 = [r.levels[k].type_I for r in rep.replicates]
        pw = [r.levels[k].power for r in rep.replicates]
        assert abs(agg.type_I_mean - statistics.fmean(t1)) <= 1e-12
        assert abs(agg.type_I_std - statistics.stdev(t1)) <= 1e-12
        assert abs(agg.power_mean - statistics.fmean(pw)) <= 1e-12
        assert abs(agg.power_std - statistics.stdev(pw)) <= 1e-12
    # the looser level never rejects less
    assert rep.aggregate(0.05).power_mean >= rep.aggregate(0.01).power_mean


def test_replicate_seeds_and_fields():
    rep = run_synthetic(ExperimentConfig(**SMALL))
    assert [r.seed for r in rep.replicates] == [10, 11, 12, 13]
    for r in rep.replicates:
        assert r.lam > 0 and r.d >= 1 and r.tau > 0
        assert r.z_scores.shape == (200,) and r.active.sum() == 5
        assert r.levels[0].theory is not None


def test_null_configuration_has_no_power_column():
    rep = run_synthetic(ExperimentConfig(p=200, n=120, s0=0, mu=0.0, replicates=3))
    agg = rep.aggregates[0]
    assert agg.power_mean is None and agg.theory_mean is None
    assert 0.0 <= agg.type_I_mean <= 0.15


def test_fixed_lambda_and_estimated_precision_modes():
    rep = run_synthetic(ExperimentConfig(**SMALL, lambda_mode="fixed", lam=0.2))
    assert all(r.lam == 0.2 for r in rep.replicates)
    circ = ExperimentConfig(p=400, n=300, s0=5, mu=0.5, replicates=2,
                            covariance=CovarianceModel.circulant(2, 0.1), precision_mode="estimated")
    rep = run_synthetic(circ)
    assert not rep.failed
    assert all(r.levels[0].theory is not None for r in rep.replicates)


def test_failed_replicates_are_recorded():
    # kappa far too large: calibration cannot find a sign change
    rep = run_synthetic(ExperimentConfig(**SMALL, kappa=1e6))
    assert len(rep.failed) == 4
    assert all("CalibrationError" in r.error for r in rep.failed)
    assert rep.aggregates[0].replicates_ok == 0 and rep.aggregates[0].type_I_mean is None


def test_report_files(tmp_path):
    rep = run_synthetic(ExperimentConfig(**SMALL))
    paths = write_report(rep, tmp_path)
    lines = paths["report"].read_text().splitlines()
    assert lines[0].startswith("alpha,replicates_ok,type_I_mean")
    assert len(lines) == 2
    assert len(paths["zscores"].read_text().splitlines()) == 1 + 4 * 200
    meta = json.loads(paths["config"].read_text())
    assert meta["config"]["p"] == 200 and "numpy" in meta["environment"]


def test_histogram_is_a_density():
    rng = np.random.default_rng(0)
    z = rng.standard_normal(5000)
    active = np.zeros(5000, dtype=bool)
    active[:100] = True
    rows = zscore_histogram(z, active)
    widths = np.diff(HIST_EDGES)
    assert sum(r[2] * w for r, w in zip(rows, widths)) == pytest.approx(1.0)
    assert sum(r[3] * w for r, w in zip(rows, widths)) == pytest.approx(1.0)


def test_emit_power_curve():
    mu0 = 2.4495 * 1.5
    rows = emit_power_curve(0.025, 0.6, mu0, [0.01, 0.05, 0.1, 0.2])
    assert rows[1][1] == pytest.approx(0.9057, abs=2e-3)
    assert np.all(np.diff([r[1] for r in rows]) >= 0)
    degenerate = emit_power_curve(0.3, 0.05, mu0, [0.05, 0.1])
    assert all(r[2] and math.isclose(r[0], r[1]) for r in degenerate)


def test_ballpark_sparsity_outside_unit_interval_is_a_config_error():
    # epsilon_bar exceeds 1 once delta is close to 2
    with pytest.raises(ConfigError):
        run_synthetic(ExperimentConfig(p=200, n=300, s0=5, mu=0.5, replicates=1))
