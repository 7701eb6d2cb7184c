"""RBF and quantum fidelity kernels over standardised AR features."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .quantumsim import FeatureMapConfig, feature_map_amplitudes, fidelity, feature_map_state

log = logging.getLogger(__name__)

PSD_TOL = 1e-8
DEFAULT_GAMMA_GRID = (0.01, 0.1, 0.5, 1.0, 2.0, 10.0)


class KernelConsistencyError(RuntimeError):
    """A Gram matrix failed its symmetry / PSD self-check."""


@dataclass(frozen=True)
class KernelConfig:
    kind: str = "quantum"
    gamma: float | None = None
    feature_map: FeatureMapConfig | None = None
    standardize: bool = True

    def __post_init__(self):
        if self.kind == "rbf":
            if self.feature_map is not None:
                raise ValueError("rbf kernel takes no feature map")
            if self.gamma is not None and not self.gamma > 0:
                raise ValueError("gamma must be positive")
        elif self.kind == "quantum":
            if self.gamma is not None:
                raise ValueError("quantum kernel takes no gamma")
            if self.feature_map is None:
                object.__setattr__(self, "feature_map", FeatureMapConfig())
        else:
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    @classmethod
    def rbf(cls, gamma: float | None = None, standardize: bool = True) -> "KernelConfig":
        return cls("rbf", gamma=gamma, standardize=standardize)

    @classmethod
    def quantum(cls, feature_map: FeatureMapConfig | None = None,
                standardize: bool = True) -> "KernelConfig":
        return cls("quantum", feature_map=feature_map or FeatureMapConfig(), standardize=standardize)

    def for_dimension(self, d: int) -> "KernelConfig":
        """Same kernel adapted to ``d`` features (quantum uses ``d`` qubits)."""
        if self.kind == "quantum":
            return KernelConfig.quantum(self.feature_map.with_qubits(d), self.standardize)
        return self

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "standardize": self.standardize}
        if self.kind == "rbf":
            out["gamma"] = self.gamma
        else:
            out["feature_map"] = self.feature_map.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "KernelConfig":
        if d["kind"] == "rbf":
            return cls.rbf(d.get("gamma"), d.get("standardize", True))
        fm = d.get("feature_map")
        return cls.quantum(FeatureMapConfig(**fm) if fm else None, d.get("standardize", True))


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray
    degenerate: np.ndarray = field(default=None)

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        stds = np.asarray(self.stds, dtype=float)
        if means.shape != stds.shape or means.ndim != 1:
            raise ValueError("means and stds must be equal-length vectors")
        if np.any(stds <= 0):
            raise ValueError("stds must be positive")
        deg = np.zeros(means.shape, bool) if self.degenerate is None else np.asarray(self.degenerate, bool)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)
        object.__setattr__(self, "degenerate", deg)

    @classmethod
    def identity(cls, d: int) -> "Standardizer":
        return cls(np.zeros(d), np.ones(d))

    def transform(self, X) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[1] != self.means.size:
            raise ValueError(f"expected {self.means.size} features, got {X.shape[1]}")
        return (X - self.means) / self.stds

    def prefix(self, k: int) -> "Standardizer":
        return Standardizer(self.means[:k], self.stds[:k], self.degenerate[:k])

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist(),
                "degenerate": self.degenerate.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(d["means"], d["stds"], d.get("degenerate"))

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def as_matrix(X) -> np.ndarray:
    """Stack FeatureVectors (or rows) into a 2-d float array."""
    if isinstance(X, np.ndarray):
        M = X.astype(float, copy=False)
    else:
        M = np.array([getattr(x, "values", x) for x in X], dtype=float)
    if M.ndim == 1:
        M = M.reshape(0 if M.size == 0 else -1, M.size if M.size else 0)
    return M


def fit_standardizer(train) -> Standardizer:
    """Per-dimension mean and population std; zero stds are replaced by 1."""
    X = as_matrix(train)
    if X.shape[0] == 0:
        raise ValueError("cannot fit a standardizer on an empty set")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    degenerate = stds <= 1e-12 * np.maximum(1.0, np.abs(means))
    if degenerate.any():
        log.debug("degenerate feature dimensions %s: std set to 1", np.flatnonzero(degenerate))
    stds = np.where(degenerate, 1.0, stds)
    return Standardizer(means, stds, degenerate)


def rbf_kernel(x, y, gamma: float) -> float:
    x = np.asarray(getattr(x, "values", x), dtype=float)
    y = np.asarray(getattr(y, "values", y), dtype=float)
    if x.shape != y.shape:
        raise ValueError("length mismatch")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return float(np.exp(-gamma * np.sum((x - y) ** 2)))


def quantum_kernel(x, y, cfg: FeatureMapConfig | None = None) -> float:
    cfg = FeatureMapConfig() if cfg is None else cfg
    return fidelity(feature_map_state(x, cfg), feature_map_state(y, cfg))


@dataclass(frozen=True)
class GramMatrix:
    values: np.ndarray
    config: KernelConfig
    sample_ids: tuple = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        ids = tuple(self.sample_ids) if len(self.sample_ids) else tuple(range(values.shape[0]))
        object.__setattr__(self, "sample_ids", ids)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def to_csv(self, path) -> None:
        header = ",".join(str(s) for s in self.sample_ids)
        np.savetxt(path, self.values, delimiter=",", header=header, comments="", fmt="%.6g")


def _prepare(X, cfg: KernelConfig, std: Standardizer | None) -> np.ndarray:
    M = as_matrix(X)
    if cfg.standardize:
        if std is None:
            raise ValueError("standardize=True requires a fitted Standardizer")
        M = std.transform(M)
    return M


def _states(M: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    fm = cfg.feature_map
    if M.shape[0] and M.shape[1] != fm.n_qubits:
        raise ValueError(f"quantum kernel needs {fm.n_qubits} features, got {M.shape[1]}")
    return np.array([feature_map_amplitudes(row, fm) for row in M]).reshape(M.shape[0], 2**fm.n_qubits)


def _cross(A: np.ndarray, B: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    if A.shape[0] and B.shape[0] and A.shape[1] != B.shape[1]:
        raise ValueError("feature dimension mismatch")
    if cfg.kind == "rbf":
        if cfg.gamma is None:
            raise ValueError("rbf kernel has no gamma; run select_gamma first")
        # per-pair differences, not the |a|^2 + |b|^2 - 2ab expansion, so
        # each entry is exact and independent of the other samples
        sq = np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=-1)
        return np.exp(-cfg.gamma * sq)
    SA, SB = _states(A, cfg), _states(B, cfg)
    overlap = np.einsum("ik,jk->ij", SA, SB.conj())
    return np.minimum(np.abs(overlap) ** 2, 1.0)


def gram(X, cfg: KernelConfig, std: Standardizer | None = None, sample_ids=(),
         psd_tol: float = PSD_TOL) -> GramMatrix:
    """Symmetric kernel matrix of ``X`` with a PSD self-check.

    Raises
    ------
    KernelConsistencyError
        If the smallest eigenvalue falls below ``-psd_tol``.
    """
    M = _prepare(X, cfg, std)
    K = _cross(M, M, cfg)
    upper = np.triu(K, 1)
    K = upper + upper.T
    np.fill_diagonal(K, 1.0)
    if K.size:
        min_eig = float(np.linalg.eigvalsh(K)[0])
        if min_eig < -psd_tol:
            raise KernelConsistencyError(f"Gram matrix not PSD: min eigenvalue {min_eig:.3e}")
    return GramMatrix(K, cfg, sample_ids)


def gram_cross(X_test, X_train, cfg: KernelConfig, std: Standardizer | None = None) -> np.ndarray:
    """Rectangular kernel matrix, rows = test samples, columns = train samples."""
    return _cross(_prepare(X_test, cfg, std), _prepare(X_train, cfg, std), cfg)


def select_gamma(train, grid=DEFAULT_GAMMA_GRID, *, nu: float = 0.1, folds: int = 5,
                 standardize: bool = True) -> float:
    """Choose the RBF width by one-class cross-validation on normal data.

    For each candidate, a model is trained on ``folds - 1`` folds and the
    held-out fold's acceptance rate is recorded.  The winner maximises mean
    acceptance among candidates whose support-vector fraction stays at or
    below ``2 * nu``; if no candidate meets that bound, all are eligible.
    Ties go to the smaller gamma.  Folds are contiguous, so the result is
    deterministic in the input order.
    """
    from .ocsvm import OcSvmConfig, train as train_ocsvm, predict_batch

    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ValueError("empty gamma grid")
    X = as_matrix(train)
    n = X.shape[0]
    if n < 10:
        raise ValueError("select_gamma needs at least 10 training samples")
    if len(grid) == 1:
        return grid[0]

    splits = np.array_split(np.arange(n), folds)
    scores = []
    for gamma in grid:
        cfg = KernelConfig.rbf(gamma, standardize)
        accept, sv_frac = [], []
        for held in splits:
            fit_idx = np.setdiff1d(np.arange(n), held)
            std = fit_standardizer(X[fit_idx]) if standardize else None
            model = train_ocsvm(gram(X[fit_idx], cfg, std), OcSvmConfig(nu=nu), std=std)
            preds = predict_batch(model, gram_cross(X[held], X[fit_idx], cfg, std))
            accept.append(1.0 - np.mean(preds))
            sv_frac.append(model.support_indices.size / fit_idx.size)
        scores.append((float(np.mean(accept)), float(np.mean(sv_frac))))

    eligible = [i for i, (_, frac) in enumerate(scores) if frac <= 2 * nu + 1e-12]
    if not eligible:
        log.info("no gamma keeps the SV fraction below 2*nu; ignoring that bound")
        eligible = list(range(len(grid)))
    best = max(scores[i][0] for i in eligible)
    # smallest gamma among those within float noise of the best acceptance
    return next(grid[i] for i in eligible if scores[i][0] >= best - 1e-12)
