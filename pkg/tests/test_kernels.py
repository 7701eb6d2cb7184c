import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qkad.armodel import FeatureVector
from qkad.kernels import (KernelConfig, KernelConsistencyError, Standardizer, fit_standardizer, gram,
                          gram_cross, quantum_kernel, rbf_kernel, select_gamma)
from qkad.quantumsim import FeatureMapConfig


def test_standardizer_example():
    std = fit_standardizer([[1.0, 10.0], [3.0, 10.0]])
    np.testing.assert_allclose(std.means, [2, 10])
    np.testing.assert_allclose(std.stds, [1, 1])
    assert list(std.degenerate) == [False, True]
    np.testing.assert_allclose(std.transform([[1.0, 10.0], [3.0, 10.0]]), [[-1, 0], [1, 0]])


def test_standardizer_zero_mean_unit_var(rng):
    X = rng.normal(3, 5, size=(200, 4))
    Z = fit_standardizer(X).transform(X)
    np.testing.assert_allclose(Z.mean(0), 0, atol=1e-12)
    np.testing.assert_allclose(Z.std(0), 1, atol=1e-12)


def test_standardizer_accepts_feature_vectors():
    fvs = [FeatureVector(np.array([1.0, 2.0])), FeatureVector(np.array([3.0, 6.0]))]
    np.testing.assert_allclose(fit_standardizer(fvs).means, [2, 4])


def test_standardizer_roundtrip():
    std = fit_standardizer([[1.0, 2.0], [2.0, 5.0], [0.0, 1.0]])
    back = Standardizer.from_dict(std.to_dict())
    assert back.fingerprint() == std.fingerprint()


def test_rbf_examples():
    assert rbf_kernel([0, 0], [0, 0], 1.0) == 1.0
    assert rbf_kernel([0.0], [1.0], 1.0) == pytest.approx(math.exp(-1))
    assert rbf_kernel([0.0], [1.0], 1.0) == pytest.approx(0.367879, abs=1e-6)
    assert rbf_kernel([0.0, 0.0], [1.0, 1.0], 2.0) == pytest.approx(0.018316, abs=1e-6)
    with pytest.raises(ValueError):
        rbf_kernel([0.0], [1.0, 2.0], 1.0)
    with pytest.raises(ValueError):
        rbf_kernel([0.0], [1.0], 0.0)


def test_quantum_kernel_one_qubit():
    cfg = FeatureMapConfig(n_qubits=1, repetitions=1, angle_scale=math.pi)
    assert quantum_kernel([0.0], [1.0], cfg) == pytest.approx(0.0, abs=1e-30)
    assert quantum_kernel([0.0], [0.5], cfg) == pytest.approx(0.5)
    assert quantum_kernel([0.3], [0.3], cfg) == pytest.approx(1.0)


@pytest.mark.parametrize("cfg", [KernelConfig.rbf(0.5), KernelConfig.quantum()])
def test_gram_properties(cfg, rng):
    X = rng.normal(size=(30, 5))
    std = fit_standardizer(X)
    K = gram(X, cfg, std)
    assert K.values.shape == (30, 30)
    np.testing.assert_array_equal(K.values, K.values.T)
    np.testing.assert_array_equal(np.diag(K.values), 1.0)
    assert np.all((K.values >= 0) & (K.values <= 1))
    assert np.linalg.eigvalsh(K.values)[0] >= -1e-8
    with pytest.raises(ValueError):
        K.values[0, 0] = 2


@pytest.mark.parametrize("cfg", [KernelConfig.rbf(0.7), KernelConfig.quantum()])
def test_gram_matches_pairwise_and_cross(cfg, rng):
    X = rng.normal(size=(12, 5))
    std = fit_standardizer(X)
    Z = std.transform(X)
    K = gram(X, cfg, std).values
    fn = (lambda a, b: rbf_kernel(a, b, cfg.gamma)) if cfg.kind == "rbf" else (
        lambda a, b: quantum_kernel(a, b, cfg.feature_map))
    for i in range(12):
        for j in range(12):
            if i != j:
                assert K[i, j] == pytest.approx(fn(Z[i], Z[j]), abs=1e-12)
    np.testing.assert_allclose(gram_cross(X, X, cfg, std), K, atol=1e-12)


def test_gram_requires_standardizer():
    with pytest.raises(ValueError):
        gram(np.ones((3, 5)), KernelConfig.rbf(1.0))
    with pytest.raises(ValueError):
        gram(np.ones((3, 5)), KernelConfig.rbf(None), Standardizer.identity(5))


def test_gram_psd_check_trips():
    with pytest.raises(KernelConsistencyError):
        gram(np.random.default_rng(0).normal(size=(20, 5)), KernelConfig.rbf(0.5, standardize=False),
             psd_tol=-1.0)


def test_quantum_dimension_checked():
    with pytest.raises(ValueError):
        gram(np.ones((3, 4)), KernelConfig.quantum(), Standardizer.identity(4))


def test_for_dimension():
    assert KernelConfig.quantum().for_dimension(3).feature_map.n_qubits == 3
    cfg = KernelConfig.rbf(1.0)
    assert cfg.for_dimension(3) is cfg


def test_config_roundtrip():
    for cfg in (KernelConfig.rbf(0.1), KernelConfig.quantum(FeatureMapConfig(5, 3, "ring", 0.2))):
        assert KernelConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        KernelConfig("poly")


def test_no_leakage_from_test_data(rng):
    X = rng.normal(size=(40, 5))
    std = fit_standardizer(X)
    cfg = KernelConfig.quantum()
    T1 = rng.normal(size=(5, 5))
    T2 = np.vstack([T1[:3], rng.normal(size=(20, 5)) * 100])
    # a test row's kernel values are independent of other test rows
    np.testing.assert_allclose(gram_cross(T1, X, cfg, std)[:3], gram_cross(T2, X, cfg, std)[:3],
                               atol=1e-15)


def test_select_gamma_single_candidate(rng):
    assert select_gamma(rng.normal(size=(20, 3)), [0.3]) == 0.3


def test_select_gamma_too_few_samples(rng):
    with pytest.raises(ValueError):
        select_gamma(rng.normal(size=(5, 3)), [0.1, 1.0])


def test_select_gamma_identical_points():
    # every gamma accepts everything: the tie goes to the smallest
    assert select_gamma(np.ones((20, 3)), [2.0, 0.5, 10.0]) == 0.5


def test_select_gamma_is_grid_member_and_deterministic(rng):
    X = rng.normal(size=(40, 5))
    g = select_gamma(X)
    assert g in (0.01, 0.1, 0.5, 1.0, 2.0, 10.0)
    assert select_gamma(X) == g


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 1000), shift=st.floats(-100, 100), scale=st.floats(0.01, 100))
def test_standardized_gram_affine_invariant(seed, shift, scale):
    X = np.random.default_rng(seed).normal(size=(10, 5))
    cfg = KernelConfig.quantum()
    K1 = gram(X, cfg, fit_standardizer(X)).values
    Y = X * scale + shift
    K2 = gram(Y, cfg, fit_standardizer(Y)).values
    np.testing.assert_allclose(K1, K2, atol=1e-8)
