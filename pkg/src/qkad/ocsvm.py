"""One-class nu-SVM on a precomputed Gram matrix.

The dual problem solved here is

    min_a  1/2 a^T K a   s.t.  0 <= a_i <= 1/(nu n),  sum_i a_i = 1

with an SMO-style solver that updates the maximal-violating pair.  The
decision value of a sample with kernel row ``k`` is ``a . k - rho``;
non-negative values are normal.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import GramMatrix, KernelConfig, Standardizer

log = logging.getLogger(__name__)


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class OcSvmConfig:
    nu: float = 0.1
    tol: float = 1e-6
    max_iter: int = 100_000

    def __post_init__(self):
        if not 0 < self.nu <= 1:
            raise ValueError("nu must lie in (0, 1]")
        if not self.tol > 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")

    def to_dict(self) -> dict:
        return {"nu": self.nu, "tol": self.tol, "max_iter": self.max_iter}


@dataclass(frozen=True)
class OcSvmModel:
    alphas: np.ndarray
    rho: float
    support_indices: np.ndarray
    config: OcSvmConfig
    kernel_config: KernelConfig | None = None
    standardizer: Standardizer | None = None
    train_features: np.ndarray | None = None
    iterations: int = 0
    kkt_violation: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n_train(self) -> int:
        return self.alphas.size

    @property
    def upper_bound(self) -> float:
        return 1.0 / (self.config.nu * self.n_train)

    def objective(self, K) -> float:
        K = getattr(K, "values", K)
        return 0.5 * float(self.alphas @ K @ self.alphas)

    def to_dict(self) -> dict:
        return {
            "alphas": self.alphas.tolist(),
            "rho": self.rho,
            "support_indices": self.support_indices.tolist(),
            "ocsvm": self.config.to_dict(),
            "kernel": None if self.kernel_config is None else self.kernel_config.to_dict(),
            "standardizer": None if self.standardizer is None else self.standardizer.to_dict(),
            "train_features": None if self.train_features is None else self.train_features.tolist(),
            "iterations": self.iterations,
            "kkt_violation": self.kkt_violation,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OcSvmModel":
        return cls(
            alphas=np.asarray(d["alphas"], dtype=float),
            rho=float(d["rho"]),
            support_indices=np.asarray(d["support_indices"], dtype=int),
            config=OcSvmConfig(**d["ocsvm"]),
            kernel_config=None if d.get("kernel") is None else KernelConfig.from_dict(d["kernel"]),
            standardizer=None if d.get("standardizer") is None else Standardizer.from_dict(d["standardizer"]),
            train_features=None if d.get("train_features") is None else np.asarray(d["train_features"], float),
            iterations=int(d.get("iterations", 0)),
            kkt_violation=float(d.get("kkt_violation", 0.0)),
            meta=d.get("meta", {}),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path) -> "OcSvmModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def fingerprint(self) -> str:
        """Hash of the kernel config and standardizer the model was trained with."""
        payload = {"kernel": None if self.kernel_config is None else self.kernel_config.to_dict(),
                   "standardizer": None if self.standardizer is None else self.standardizer.to_dict()}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _initial_alphas(n: int, C: float) -> np.ndarray:
    # fill the first floor(1/C) entries at the bound, put the remainder next
    alphas = np.zeros(n)
    full = min(n, int(math.floor(1.0 / C + 1e-12)))
    alphas[:full] = C
    rest = 1.0 - full * C
    if full < n and rest > 0:
        alphas[full] = rest
    return alphas


def _rho(alphas: np.ndarray, grad: np.ndarray, C: float, tol: float) -> tuple[float, bool]:
    free = (alphas > tol) & (alphas < C - tol)
    if free.any():
        return float(np.mean(grad[free])), False
    at_upper = alphas >= C - tol
    at_lower = alphas <= tol
    lo = grad[at_upper].max() if at_upper.any() else None
    hi = grad[at_lower].min() if at_lower.any() else None
    if lo is None:
        return float(hi), True
    if hi is None:
        return float(lo), True
    return 0.5 * float(lo + hi), True


def train(gram: GramMatrix | np.ndarray, cfg: OcSvmConfig | None = None, *,
          std: Standardizer | None = None, train_features=None) -> OcSvmModel:
    """Solve the one-class dual for a Gram matrix of normal training data."""
    cfg = OcSvmConfig() if cfg is None else cfg
    K = np.asarray(getattr(gram, "values", gram), dtype=float)
    kernel_config = getattr(gram, "config", None)
    if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] == 0:
        raise ValueError("need a non-empty square Gram matrix")
    if not np.all(np.isfinite(K)):
        raise ValueError("Gram matrix has non-finite entries")
    n = K.shape[0]
    C = 1.0 / (cfg.nu * n)
    alphas = _initial_alphas(n, C)
    grad = K @ alphas
    diag = np.diag(K)

    violation = 0.0
    it = 0
    for it in range(1, cfg.max_iter + 1):
        # i can grow (alpha_i < C) and has the smallest gradient,
        # j can shrink (alpha_j > 0) and has the largest gradient
        up = alphas < C
        down = alphas > 0
        if not up.any() or not down.any():
            violation = 0.0
            break
        i = int(np.argmin(np.where(up, grad, np.inf)))
        j = int(np.argmax(np.where(down, grad, -np.inf)))
        violation = float(grad[j] - grad[i])
        if violation < cfg.tol:
            break
        curvature = diag[i] + diag[j] - 2.0 * K[i, j]
        step = violation / curvature if curvature > 1e-12 else np.inf
        room_i, room_j = C - alphas[i], alphas[j]
        step = min(step, room_i, room_j)
        # land exactly on a bound so the index leaves the candidate set
        alphas[i] = C if step == room_i else alphas[i] + step
        alphas[j] = 0.0 if step == room_j else alphas[j] - step
        grad += step * (K[:, i] - K[:, j])
    else:
        warnings.warn(f"one-class SVM hit max_iter={cfg.max_iter}; KKT violation {violation:.3e}",
                      ConvergenceWarning, stacklevel=2)

    # undo drift of the equality constraint
    alphas = np.clip(alphas, 0.0, C)
    alphas /= alphas.sum()
    grad = K @ alphas
    rho, degenerate = _rho(alphas, grad, C, cfg.tol * C)
    if degenerate:
        log.debug("no margin support vectors; rho taken between bound groups")
    support = np.flatnonzero(alphas > cfg.tol)
    features = None if train_features is None else np.asarray(
        [getattr(x, "values", x) for x in train_features], dtype=float)
    return OcSvmModel(alphas=alphas, rho=rho, support_indices=support, config=cfg,
                      kernel_config=kernel_config, standardizer=std, train_features=features,
                      iterations=it, kkt_violation=violation)


def decision(model: OcSvmModel, k_row) -> float:
    k_row = np.asarray(k_row, dtype=float)
    if k_row.shape != (model.n_train,):
        raise ValueError(f"kernel row must have {model.n_train} entries")
    return float(model.alphas @ k_row) - model.rho


def decision_batch(model: OcSvmModel, cross_gram) -> np.ndarray:
    G = np.asarray(cross_gram, dtype=float)
    if G.size == 0:
        return np.zeros(0)
    if G.ndim != 2 or G.shape[1] != model.n_train:
        raise ValueError(f"cross Gram must have {model.n_train} columns")
    return G @ model.alphas - model.rho


def predict_batch(model: OcSvmModel, cross_gram) -> np.ndarray:
    """Label rows 0 (normal) or 1 (anomaly).

    A sample is anomalous when its decision value is negative.  Margin
    support vectors sit on the boundary only up to the solver tolerance,
    so values within ``model.config.tol`` of zero count as on the boundary
    and hence normal.
    """
    return (decision_batch(model, cross_gram) < -model.config.tol).astype(int)


def predict_features(model: OcSvmModel, X) -> np.ndarray:
    """Predict raw feature vectors using the training data stored in the model."""
    from .kernels import gram_cross

    if model.train_features is None or model.kernel_config is None:
        raise ValueError("model carries no training features / kernel config")
    return predict_batch(model, gram_cross(X, model.train_features, model.kernel_config,
                                           model.standardizer))


def fit_detector(train_features, kernel_config: KernelConfig, cfg: OcSvmConfig | None = None,
                 gamma_grid=None) -> OcSvmModel:
    """Standardize, pick the RBF width if unset, and train on normal features.

    The standardizer is fitted on ``train_features`` only.
    """
    from .kernels import DEFAULT_GAMMA_GRID, as_matrix, fit_standardizer, gram, select_gamma

    cfg = OcSvmConfig() if cfg is None else cfg
    X = as_matrix(train_features)
    if X.shape[0] < 2:
        raise ValueError("need at least 2 training samples")
    if kernel_config.kind == "rbf" and kernel_config.gamma is None:
        grid = DEFAULT_GAMMA_GRID if gamma_grid is None else gamma_grid
        gamma = select_gamma(X, grid, nu=cfg.nu, standardize=kernel_config.standardize)
        kernel_config = KernelConfig.rbf(gamma, kernel_config.standardize)
    std = fit_standardizer(X) if kernel_config.standardize else None
    return train(gram(X, kernel_config, std), cfg, std=std, train_features=X)
