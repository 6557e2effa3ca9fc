import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdltest.exceptions import InvalidCovarianceError, InvalidParameterError
from sdltest.model import (
    CovarianceModel,
    SignalSpec,
    build_covariance,
    covariance_factor,
    precision_matrix,
    sample_instance,
    scaling_of,
)


def circulant_entry(i, j, p, band, off):
    lag = abs(i - j)
    lag = min(lag, p - lag)
    if lag == 0:
        return 1.0
    return off if lag <= band else 0.0


def test_circulant_entries_match_definition_with_wraparound():
    p = 2000
    S = build_covariance(CovarianceModel.circulant(5, 0.1), p)
    assert S[0, 0] == 1.0
    assert S[0, 5] == 0.1
    assert S[0, 6] == 0.0
    # 1-based (1, 1997) is zero-based (0, 1996): wrap-around lag 4
    assert S[0, 1996] == 0.1
    assert S[0, 1994] == 0.0
    rng = np.random.default_rng(0)
    for i, j in rng.integers(0, p, size=(200, 2)):
        assert S[i, j] == circulant_entry(i, j, p, 5, 0.1)


def test_circulant_eigenvalues_match_fourier_oracle():
    p, band, off = 64, 3, 0.15
    S = build_covariance(CovarianceModel.circulant(band, off), p)
    k = np.arange(p)
    oracle = 1.0 + 2.0 * off * sum(np.cos(2 * np.pi * k * ell / p) for ell in range(1, band + 1))
    assert np.allclose(np.sort(np.linalg.eigvalsh(S)), np.sort(oracle), atol=1e-12)


def test_circulant_rejects_wide_band_and_indefinite():
    with pytest.raises(InvalidCovarianceError):
        build_covariance(CovarianceModel.circulant(5, 0.1), 10)
    with pytest.raises(InvalidCovarianceError):
        build_covariance(CovarianceModel.circulant(3, 0.5), 50)
    with pytest.raises(InvalidCovarianceError):
        CovarianceModel.circulant(0, 0.1)


def test_dense_validation():
    with pytest.raises(InvalidCovarianceError):
        CovarianceModel.dense([[1.0, 0.2], [0.3, 1.0]])
    with pytest.raises(InvalidCovarianceError):
        CovarianceModel.dense([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(InvalidCovarianceError):
        CovarianceModel.dense(np.ones((2, 3)))
    m = CovarianceModel.dense([[2.0, 0.5], [0.5, 1.0]])
    with pytest.raises(InvalidCovarianceError):
        build_covariance(m, 3)


def test_factor_and_precision():
    model = CovarianceModel.circulant(2, 0.2)
    S = build_covariance(model, 30)
    L = covariance_factor(model, 30)
    assert np.allclose(L @ L.T, S, atol=1e-13)
    assert np.allclose(np.triu(L, 1), 0.0)
    assert np.allclose(precision_matrix(model, 30) @ S, np.eye(30), atol=1e-12)
    assert covariance_factor(CovarianceModel.identity(), 30) is None
    assert precision_matrix(CovarianceModel.identity(), 30) is None


def test_signal_spec_validation():
    with pytest.raises(InvalidParameterError):
        SignalSpec(10, 11, 1.0)
    with pytest.raises(InvalidParameterError):
        SignalSpec(10, 3, 0.0)
    SignalSpec(10, 0, 0.0)


def test_instance_structure_and_determinism():
    signal = SignalSpec(50, 5, 0.7)
    a = sample_instance(CovarianceModel.identity(), signal, 30, 0.5, seed=11)
    b = sample_instance(CovarianceModel.identity(), signal, 30, 0.5, seed=11)
    c = sample_instance(CovarianceModel.identity(), signal, 30, 0.5, seed=12)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert not np.array_equal(a.X, c.X)
    assert np.count_nonzero(a.theta0) == 5
    assert set(np.unique(a.theta0)) == {0.0, 0.7}
    assert np.allclose(a.y, a.X @ a.theta0 + a.w, atol=1e-14)
    assert (a.n, a.p) == (30, 50)
    assert not a.X.flags.writeable


def test_precomputed_factor_gives_same_draw():
    model = CovarianceModel.circulant(2, 0.2)
    signal = SignalSpec(40, 4, 1.0)
    a = sample_instance(model, signal, 20, 1.0, seed=5)
    b = sample_instance(model, signal, 20, 1.0, seed=5, factor=covariance_factor(model, 40))
    assert np.array_equal(a.X, b.X)


def test_rows_have_target_covariance_in_large_sample():
    model = CovarianceModel.circulant(2, 0.3)
    p = 12
    inst = sample_instance(model, SignalSpec(p, 0), 40000, 1.0, seed=3)
    emp = inst.X.T @ inst.X / inst.n
    assert np.max(np.abs(emp - build_covariance(model, p))) < 0.03


def test_zero_noise_and_null_signal():
    inst = sample_instance(CovarianceModel.identity(), SignalSpec(20, 3, 1.0), 10, 0.0, seed=1)
    assert np.all(inst.w == 0) and np.allclose(inst.y, inst.X @ inst.theta0)
    assert scaling_of(inst).mu0 is None
    null = sample_instance(CovarianceModel.identity(), SignalSpec(20, 0), 10, 1.0, seed=1)
    assert np.all(null.y == null.w)


def test_scaling_parameters():
    inst = sample_instance(CovarianceModel.identity(), SignalSpec(1000, 25, 0.1), 600, 1.0, seed=0)
    sc = scaling_of(inst)
    assert sc.delta == pytest.approx(0.6)
    assert sc.epsilon == pytest.approx(0.025)
    assert sc.sigma0 == pytest.approx(1 / math.sqrt(600))
    assert sc.mu0 == pytest.approx(0.1 * math.sqrt(600))


@settings(max_examples=25, deadline=None)
@given(p=st.integers(5, 60), band=st.integers(1, 2), seed=st.integers(0, 10_000))
def test_circulant_is_shift_invariant(p, band, seed):
    S = build_covariance(CovarianceModel.circulant(band, 0.1), p)
    k = seed % p
    assert np.array_equal(np.roll(np.roll(S, k, axis=0), k, axis=1), S)
    assert np.array_equal(S, S.T)
