import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import dense_feature_map
from qkad.quantumsim import (FeatureMapConfig, QuantumState, apply_cnot, apply_ry, entangler_pairs,
                             feature_map_state, fidelity, zero_state)


def test_state_validation():
    with pytest.raises(ValueError):
        QuantumState(np.array([1.0, 0, 0]))
    with pytest.raises(ValueError):
        QuantumState(np.array([1.0, 1.0]))
    assert zero_state(3).n_qubits == 3


def test_ry_pi_flips():
    np.testing.assert_allclose(apply_ry(zero_state(1), 0, math.pi).amplitudes, [0, 1], atol=1e-15)


def test_ry_half_pi():
    r = 1 / math.sqrt(2)
    np.testing.assert_allclose(apply_ry(zero_state(1), 0, math.pi / 2).amplitudes, [r, r], atol=1e-15)


def test_ry_on_qubit1_is_bit1():
    out = apply_ry(zero_state(2), 1, math.pi).amplitudes
    np.testing.assert_allclose(out, [0, 0, 1, 0], atol=1e-15)


def test_bell_state():
    s = apply_cnot(apply_ry(zero_state(2), 0, math.pi / 2), 0, 1)
    r = 1 / math.sqrt(2)
    np.testing.assert_allclose(s.amplitudes, [r, 0, 0, r], atol=1e-15)


def test_cnot_errors():
    with pytest.raises(ValueError):
        apply_cnot(zero_state(2), 1, 1)
    with pytest.raises(IndexError):
        apply_cnot(zero_state(2), 0, 2)
    with pytest.raises(IndexError):
        apply_ry(zero_state(2), 5, 0.1)


def test_feature_map_two_qubit_example():
    cfg = FeatureMapConfig(n_qubits=2, repetitions=1, angle_scale=math.pi)
    s = feature_map_state([0.5, 0.0], cfg)
    r = 1 / math.sqrt(2)
    np.testing.assert_allclose(s.amplitudes, [r, 0, 0, r], atol=1e-12)


def test_feature_map_zero_input_is_zero_state():
    s = feature_map_state(np.zeros(5))
    np.testing.assert_allclose(s.amplitudes, zero_state(5).amplitudes, atol=1e-15)


def test_ring_only_differs_beyond_two_qubits():
    assert entangler_pairs(FeatureMapConfig(2, entangler="ring")) == [(0, 1)]
    assert entangler_pairs(FeatureMapConfig(3, entangler="ring")) == [(0, 1), (1, 2), (2, 0)]


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("entangler", ["linear_chain", "ring"])
@pytest.mark.parametrize("reps", [1, 2, 3])
def test_matches_dense_oracle(n, entangler, reps, rng):
    cfg = FeatureMapConfig(n, reps, entangler, angle_scale=1.3)
    for _ in range(5):
        x = rng.normal(size=n) * 2
        np.testing.assert_allclose(feature_map_state(x, cfg).amplitudes, dense_feature_map(x, cfg),
                                   atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(x=st.lists(st.floats(-50, 50), min_size=5, max_size=5))
def test_norm_preserved(x):
    amps = feature_map_state(x).amplitudes
    assert abs(np.vdot(amps, amps).real - 1) < 1e-10


def test_fidelity_examples():
    zero = zero_state(1)
    one = apply_ry(zero, 0, math.pi)
    plus = apply_ry(zero, 0, math.pi / 2)
    assert fidelity(zero, zero) == pytest.approx(1.0)
    assert fidelity(zero, one) == pytest.approx(0.0, abs=1e-30)
    assert fidelity(zero, plus) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        fidelity(zero, zero_state(2))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_fidelity_symmetric_and_bounded(seed):
    r = np.random.default_rng(seed)
    a = feature_map_state(r.normal(size=5) * 3)
    b = feature_map_state(r.normal(size=5) * 3)
    f = fidelity(a, b)
    assert -1e-12 <= f <= 1 + 1e-12
    assert f == pytest.approx(fidelity(b, a), abs=1e-14)
    assert fidelity(a, a) == pytest.approx(1.0, abs=1e-12)
