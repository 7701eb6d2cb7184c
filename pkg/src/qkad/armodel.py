"""Autoregressive modelling: Yule-Walker estimation and order selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .signal import TimeSeries

CONDITIONS = ("0/0", "0/1", "1/0", "1/1")


class DegenerateSeriesError(ValueError):
    """Raised for constant series, whose autocovariance vanishes."""


class SingularAutocovarianceError(ValueError):
    pass


@dataclass(frozen=True)
class ARModel:
    order: int
    intercept: float
    phi: np.ndarray
    sigma2: float

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.shape != (self.order,):
            raise ValueError("phi must have exactly `order` coefficients")
        if self.sigma2 < 0 or not np.all(np.isfinite(phi)):
            raise ValueError("invalid AR parameters")
        object.__setattr__(self, "phi", phi)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    source_label: str | None = None

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if values.ndim != 1 or values.size < 1 or not np.all(np.isfinite(values)):
            raise ValueError("feature values must be a non-empty finite vector")
        if self.source_label is not None and self.source_label not in CONDITIONS:
            raise ValueError(f"source_label must be one of {CONDITIONS}")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size


def _samples(ts) -> np.ndarray:
    return ts.samples if isinstance(ts, TimeSeries) else np.asarray(ts, dtype=float)


def autocovariance(ts, max_lag: int, *, check: bool = True) -> np.ndarray:
    """Biased sample autocovariance for lags ``0..max_lag``.

    The 1/N normalisation keeps the implied Toeplitz matrix positive
    semidefinite.  With ``check`` a constant series raises
    :class:`DegenerateSeriesError`; otherwise the zero sequence is returned.
    """
    y = _samples(ts)
    n = y.size
    if not 0 <= max_lag < n:
        raise ValueError(f"max_lag must lie in [0, {n - 1}]")
    d = y - y.mean()
    acov = np.array([np.dot(d[k:], d[:n - k]) / n for k in range(max_lag + 1)])
    if acov[0] <= 0.0 or np.ptp(y) == 0.0:
        if check:
            raise DegenerateSeriesError("constant series has zero variance")
        acov[:] = 0.0
    return acov


def levinson_durbin_path(acov, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Run the recursion up to order ``p``.

    Returns the order-``p`` coefficients and the prediction-error variance
    after each order, ``sigma2[0] = acov[0]`` through ``sigma2[p]``.
    """
    acov = np.asarray(acov, dtype=float)
    if p < 1 or acov.size < p + 1:
        raise ValueError("need at least p+1 autocovariances and p >= 1")
    if not acov[0] > 0:
        raise SingularAutocovarianceError("acov[0] must be positive")
    phi = np.zeros(p)
    err = np.empty(p + 1)
    err[0] = acov[0]
    for m in range(1, p + 1):
        k = (acov[m] - np.dot(phi[:m - 1], acov[m - 1:0:-1])) / err[m - 1]
        prev = phi[:m - 1].copy()
        phi[:m - 1] = prev - k * prev[::-1]
        phi[m - 1] = k
        e = err[m - 1] * (1.0 - k * k)
        if e < -1e-12 * acov[0]:
            raise SingularAutocovarianceError(f"prediction error turned negative at order {m}")
        if e <= 0.0 and m < p:
            raise SingularAutocovarianceError(f"autocovariance is singular at order {m}")
        err[m] = max(e, 0.0)
    return phi, err


def levinson_durbin(acov, p: int) -> ARModel:
    phi, err = levinson_durbin_path(acov, p)
    return ARModel(order=p, intercept=0.0, phi=phi, sigma2=float(err[p]))


def yule_walker_direct(acov, p: int) -> np.ndarray:
    """Solve the order-``p`` Yule-Walker system with a dense solver."""
    acov = np.asarray(acov, dtype=float)
    if p < 1 or acov.size < p + 1:
        raise ValueError("need at least p+1 autocovariances and p >= 1")
    idx = np.arange(p)
    toeplitz = acov[np.abs(idx[:, None] - idx[None, :])]
    try:
        return np.linalg.solve(toeplitz, acov[1:p + 1])
    except np.linalg.LinAlgError as exc:
        raise SingularAutocovarianceError("Yule-Walker system is singular") from exc


def information_criteria(sigma2, n: int) -> tuple[np.ndarray, np.ndarray]:
    """AIC and BIC for orders 1..len(sigma2) given per-order error variances."""
    sigma2 = np.asarray(sigma2, dtype=float)
    orders = np.arange(1, sigma2.size + 1)
    fit = n * np.log(sigma2)
    return fit + 2 * orders, fit + orders * math.log(n)


def select_order(ts, p_max: int, criterion: str = "aic") -> tuple[int, np.ndarray]:
    """Pick the AR order in ``1..p_max`` minimising AIC or BIC.

    Returns the chosen order and the criterion value for every candidate
    (index 0 is order 1).  Ties go to the smaller order.
    """
    y = _samples(ts)
    n = y.size
    if p_max < 1 or p_max >= n / 2:
        raise ValueError("p_max must satisfy 1 <= p_max < N/2")
    if criterion not in ("aic", "bic"):
        raise ValueError("criterion must be 'aic' or 'bic'")
    acov = autocovariance(y, p_max)
    _, err = levinson_durbin_path(acov, p_max)
    if np.any(err[1:] <= 0):
        raise DegenerateSeriesError("zero prediction error; series is deterministic")
    aic, bic = information_criteria(err[1:], n)
    values = aic if criterion == "aic" else bic
    return int(np.argmin(values)) + 1, values


def fit_ar(ts, p: int = 5) -> ARModel:
    """Fit AR(p) to the mean-removed series; the intercept is 0 by construction."""
    return levinson_durbin(autocovariance(ts, p), p)


def extract_features(ts, p: int = 5, source_label: str | None = None) -> FeatureVector:
    return FeatureVector(fit_ar(ts, p).phi, source_label)


def simulate_ar(phi, n: int, sigma2: float = 1.0, seed=None, burn_in: int = 1000) -> np.ndarray:
    """Draw ``n`` samples of a zero-mean AR process with Gaussian innovations."""
    from scipy.signal import lfilter

    phi = np.asarray(phi, dtype=float)
    rng = np.random.default_rng(seed)
    eps = rng.normal(scale=math.sqrt(sigma2), size=n + burn_in)
    y = lfilter([1.0], np.concatenate(([1.0], -phi)), eps)
    return y[burn_in:]
