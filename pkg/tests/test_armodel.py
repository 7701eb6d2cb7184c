import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qkad.armodel import (DegenerateSeriesError, SingularAutocovarianceError, autocovariance,
                          extract_features, levinson_durbin, levinson_durbin_path, select_order,
                          simulate_ar, yule_walker_direct, information_criteria)
from qkad.signal import TimeSeries


def _ar_acov(phi, sigma2, nlags):
    """Exact autocovariance of a causal AR process via its MA(inf) weights."""
    from scipy.signal import lfilter

    impulse = np.zeros(5000)
    impulse[0] = 1.0
    psi = lfilter([1.0], np.concatenate(([1.0], -np.asarray(phi))), impulse)
    return np.array([sigma2 * np.dot(psi[: psi.size - k], psi[k:]) for k in range(nlags + 1)])


def random_acov(rng, p):
    # biased autocovariance of any non-constant series is a valid sequence
    y = rng.standard_normal(rng.integers(p + 2, 60)).cumsum()
    return autocovariance(y, p)


def test_autocovariance_examples():
    with pytest.raises(DegenerateSeriesError):
        autocovariance(TimeSeries(np.ones(4)), 1)
    np.testing.assert_allclose(autocovariance(np.array([1.0, -1, 1, -1]), 1), [1.0, -0.75])


def test_autocovariance_white_noise(rng):
    acov = autocovariance(rng.standard_normal(100_000), 5)
    assert acov[0] == pytest.approx(1.0, abs=0.02)
    assert np.all(np.abs(acov[1:]) < 0.02)


def test_autocovariance_matches_brute_force(rng):
    y = rng.standard_normal(37)
    n, m = y.size, y.mean()
    brute = [sum((y[t] - m) * (y[t - k] - m) for t in range(k, n)) / n for k in range(6)]
    np.testing.assert_allclose(autocovariance(y, 5), brute, rtol=1e-12)


def test_levinson_ar1():
    model = levinson_durbin([4 / 3, 2 / 3, 1 / 3], 1)
    assert model.phi[0] == pytest.approx(0.5, abs=1e-12)
    assert model.sigma2 == pytest.approx(1.0, abs=1e-12)
    assert model.intercept == 0.0


def test_levinson_ar1_order2_has_zero_second_lag():
    model = levinson_durbin([4 / 3, 2 / 3, 1 / 3], 2)
    np.testing.assert_allclose(model.phi, [0.5, 0.0], atol=1e-12)
    assert model.sigma2 == pytest.approx(1.0, abs=1e-12)


def test_levinson_white_noise():
    model = levinson_durbin([1.0, 0.0], 1)
    assert model.phi[0] == 0.0 and model.sigma2 == 1.0


def test_yule_walker_closed_forms():
    acov = np.array([2.0, 0.7, 0.1])
    assert yule_walker_direct(acov, 1)[0] == pytest.approx(0.35)
    np.testing.assert_allclose(yule_walker_direct([4 / 3, 2 / 3, 1 / 3], 1), [0.5], atol=1e-12)
    np.testing.assert_allclose(yule_walker_direct([1.0, 0.0], 1), [0.0], atol=1e-12)


def test_yule_walker_recovers_ar2():
    # gamma(0), gamma(1) from the Yule-Walker relations of AR(2) with sigma2 = 1
    p1, p2 = 0.5, -0.3
    g1_over_g0 = p1 / (1 - p2)
    g0 = 1.0 / (1 - p1 * g1_over_g0 - p2 * (p1 * g1_over_g0 + p2))
    g1 = g1_over_g0 * g0
    g2 = p1 * g1 + p2 * g0
    np.testing.assert_allclose(yule_walker_direct([g0, g1, g2], 2), [p1, p2], atol=1e-12)
    np.testing.assert_allclose(levinson_durbin([g0, g1, g2], 2).phi, [p1, p2], atol=1e-12)
    np.testing.assert_allclose([g0, g1, g2], _ar_acov([p1, p2], 1.0, 2), rtol=1e-9)


def test_levinson_matches_direct_p5(rng):
    for _ in range(50):
        acov = random_acov(rng, 5)
        np.testing.assert_allclose(levinson_durbin(acov, 5).phi, yule_walker_direct(acov, 5),
                                   atol=1e-10, rtol=0)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(1, 10))
def test_levinson_oracle_property(seed, p):
    acov = random_acov(np.random.default_rng(seed), p)
    try:
        direct = yule_walker_direct(acov, p)
    except SingularAutocovarianceError:
        return
    lev = levinson_durbin(acov, p)
    np.testing.assert_allclose(lev.phi, direct, atol=1e-10 * max(1.0, np.abs(direct).max()), rtol=0)
    assert lev.sigma2 >= 0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_prediction_error_non_increasing(seed):
    acov = random_acov(np.random.default_rng(seed), 8)
    _, err = levinson_durbin_path(acov, 8)
    assert np.all(np.diff(err) <= 1e-12 * err[0])


def test_levinson_rejects_invalid():
    with pytest.raises(SingularAutocovarianceError):
        levinson_durbin([0.0, 0.0], 1)
    with pytest.raises(SingularAutocovarianceError):
        # |rho(1)| > 1 is not an autocovariance
        levinson_durbin([1.0, 2.0, 0.0], 2)


def test_information_criteria_formula():
    aic, bic = information_criteria([2.0, 1.5], 100)
    assert aic[0] == pytest.approx(100 * np.log(2.0) + 2)
    assert bic[1] == pytest.approx(100 * np.log(1.5) + 2 * np.log(100))


def test_select_order_ar5():
    y = simulate_ar([0.5, -0.3, 0.2, -0.15, 0.1], 10_000, seed=3)
    p, values = select_order(y, 10)
    assert p == 5
    assert values.shape == (10,)


def test_select_order_white_noise_bic(rng):
    p, _ = select_order(rng.standard_normal(10_000), 8, criterion="bic")
    assert p == 1


def test_select_order_single_candidate(rng):
    assert select_order(rng.standard_normal(100), 1)[0] == 1


def test_select_order_degenerate():
    with pytest.raises(DegenerateSeriesError):
        select_order(np.ones(100), 3)


def test_extract_features_ar1():
    fv = extract_features(TimeSeries(simulate_ar([0.8], 10_000, seed=1)), 1)
    assert fv.values[0] == pytest.approx(0.8, abs=0.02)


def test_extract_features_white_noise(rng):
    fv = extract_features(TimeSeries(rng.standard_normal(10_000)), 5)
    assert len(fv) == 5
    assert np.all(np.abs(fv.values) < 0.05)


def test_extract_features_constant():
    with pytest.raises(DegenerateSeriesError):
        extract_features(TimeSeries(np.full(50, 3.0)), 5)


def test_extract_features_ignores_offset():
    y = simulate_ar([0.6, -0.2], 2000, seed=4)
    np.testing.assert_allclose(extract_features(y + 7.0, 2).values, extract_features(y, 2).values,
                               atol=1e-12)


def test_consistency_improves_with_n():
    phi = np.array([0.5, -0.3, 0.2, -0.15, 0.1])
    errs = {}
    for n in (10_000, 40_000):
        errs[n] = np.median([np.abs(extract_features(simulate_ar(phi, n, seed=s), 5).values - phi).max()
                             for s in range(15)])
    assert errs[40_000] < errs[10_000]
