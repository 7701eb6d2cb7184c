"""Detection metrics, paired statistics, feature sweeps and quadrant diagnosis."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .armodel import CONDITIONS
from .kernels import KernelConfig, Standardizer, as_matrix
from .ocsvm import OcSvmConfig, fit_detector, predict_features

POSITIVE_CLASSES = ("anomaly", "normal")
QUADRANT_EQUIPMENT = {"I": "none", "II": "CON", "III": "none", "IV": "CHA", "origin": "none"}
AXIS_TOL = 1e-9


class DegenerateStatisticError(ValueError):
    pass


def sig6(x: float) -> float:
    """Round to 6 significant digits for serialisation."""
    return float(f"{x:.6g}")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    fp: int
    tn: int
    positive_class: str = "anomaly"

    def __post_init__(self):
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")
        if self.positive_class not in POSITIVE_CLASSES:
            raise ValueError(f"positive_class must be one of {POSITIVE_CLASSES}")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def relabel(self) -> "ConfusionMatrix":
        """The same predictions read with the other class as positive."""
        other = "normal" if self.positive_class == "anomaly" else "anomaly"
        return ConfusionMatrix(tp=self.tn, fn=self.fp, fp=self.fn, tn=self.tp, positive_class=other)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.positive_class != self.positive_class:
            raise ValueError("cannot add matrices with different positive classes")
        return ConfusionMatrix(self.tp + other.tp, self.fn + other.fn, self.fp + other.fp,
                               self.tn + other.tn, self.positive_class)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fn": self.fn, "fp": self.fp, "tn": self.tn,
                "positive_class": self.positive_class}


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    positive_class: str = "anomaly"
    per_condition: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "accuracy": sig6(self.accuracy),
            "precision": sig6(self.precision),
            "recall": sig6(self.recall),
            "f1": sig6(self.f1),
            "positive_class": self.positive_class,
            "per_condition": self.per_condition,
        }


def confusion(preds, labels, positive_class: str = "anomaly") -> ConfusionMatrix:
    """Tally predictions against labels; both use 0 = normal, 1 = anomaly."""
    preds = np.asarray(preds, dtype=int)
    labels = np.asarray(labels, dtype=int)
    if preds.shape != labels.shape:
        raise ValueError("preds and labels differ in length")
    if preds.size == 0:
        raise ValueError("empty prediction set")
    if positive_class not in POSITIVE_CLASSES:
        raise ValueError(f"positive_class must be one of {POSITIVE_CLASSES}")
    pos = 1 if positive_class == "anomaly" else 0
    p, a = preds == pos, labels == pos
    return ConfusionMatrix(tp=int(np.sum(p & a)), fn=int(np.sum(~p & a)),
                           fp=int(np.sum(p & ~a)), tn=int(np.sum(~p & ~a)),
                           positive_class=positive_class)


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def metrics(cm: ConfusionMatrix, per_condition: dict | None = None) -> MetricsReport:
    if cm.total == 0:
        raise ValueError("metrics need a non-empty confusion matrix")
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    return MetricsReport(
        accuracy=(cm.tp + cm.tn) / cm.total,
        precision=precision,
        recall=recall,
        f1=_ratio(2 * precision * recall, precision + recall),
        positive_class=cm.positive_class,
        per_condition=per_condition or {},
    )


def condition_label(con_state: int, cha_state: int) -> str:
    return f"{int(con_state)}/{int(cha_state)}"


def report(preds, labels, conditions, positive_class: str = "anomaly") -> tuple[MetricsReport, ConfusionMatrix]:
    """Overall metrics plus a per-condition breakdown ("0/0" ... "1/1")."""
    preds = np.asarray(preds, dtype=int)
    labels = np.asarray(labels, dtype=int)
    conditions = np.asarray(conditions)
    cm = confusion(preds, labels, positive_class)
    breakdown = {}
    for cond in CONDITIONS:
        mask = conditions == cond
        if mask.any():
            sub = confusion(preds[mask], labels[mask], positive_class)
            breakdown[cond] = {**sub.to_dict(), "n": int(mask.sum()),
                               "accuracy": sig6((sub.tp + sub.tn) / sub.total)}
    return metrics(cm, breakdown), cm


# -- Student t ---------------------------------------------------------------

def _betacf(a: float, b: float, x: float, max_iter: int = 300, eps: float = 1e-15) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x in (0.0, 1.0):
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    return betainc(df / 2.0, 0.5, df / (df + t * t))


def paired_t_test(a, b) -> tuple[float, int, float]:
    """Two-sided paired t-test; returns (t, df, p)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be equal-length vectors")
    n = a.size
    if n < 2:
        raise ValueError("paired t-test needs n >= 2")
    d = a - b
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        raise DegenerateStatisticError("degenerate: differences have zero variance")
    t = float(np.mean(d)) / (sd / math.sqrt(n))
    df = n - 1
    return t, df, t_two_sided_p(t, df)


def cohens_d(a, b) -> float:
    """Mean difference over the root of the averaged sample variances."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("Cohen's d needs at least two values per group")
    return cohens_d_from_stats(a.mean(), a.std(ddof=1), b.mean(), b.std(ddof=1))


def cohens_d_from_stats(mean_a: float, sd_a: float, mean_b: float, sd_b: float) -> float:
    pooled = math.sqrt((sd_a**2 + sd_b**2) / 2.0)
    if pooled == 0.0:
        raise DegenerateStatisticError("degenerate: zero pooled standard deviation")
    return (mean_a - mean_b) / pooled


# -- feature sweep -------------------------------------------------------------

def _labels(labels) -> np.ndarray:
    return np.asarray(labels, dtype=int)


def evaluate_detector(train, test, labels, kernel_config: KernelConfig,
                      ocsvm_config: OcSvmConfig | None = None, gamma_grid=None):
    """Train on ``train`` (normals only) and score ``test``.

    Returns ``(model, predictions, confusion)`` with anomaly as positive.
    """
    model = fit_detector(train, kernel_config, ocsvm_config, gamma_grid)
    preds = predict_features(model, as_matrix(test))
    return model, preds, confusion(preds, _labels(labels), "anomaly")


def feature_sweep(train, test, labels, kernel_config: KernelConfig,
                  ocsvm_config: OcSvmConfig | None = None, gamma_grid=None,
                  max_features: int | None = None) -> list[dict]:
    """Accuracy and F1 using only the first k coefficients, k = 1..d.

    Each prefix gets its own standardizer and, for the quantum kernel, a
    k-qubit feature map.  An RBF width left unset is re-selected per k.
    """
    X_train, X_test = as_matrix(train), as_matrix(test)
    d = X_train.shape[1]
    if d < 1:
        raise ValueError("feature dimension must be >= 1")
    rows = []
    for k in range(1, (max_features or d) + 1):
        cfg = kernel_config.for_dimension(k)
        model, _, cm = evaluate_detector(X_train[:, :k], X_test[:, :k], labels, cfg,
                                         ocsvm_config, gamma_grid)
        rep = metrics(cm)
        rows.append({"k": k, "accuracy": rep.accuracy, "f1": rep.f1,
                     "gamma": model.kernel_config.gamma})
    return rows


# -- quadrant diagnosis --------------------------------------------------------

@dataclass(frozen=True)
class QuadrantDiagnosis:
    quadrant: str
    implicated_equipment: frozenset

    @property
    def equipment(self) -> str:
        return next(iter(self.implicated_equipment))


def quadrant_of(x3: float, x4: float, axis_tol: float = AXIS_TOL) -> str:
    if abs(x3) < axis_tol or abs(x4) < axis_tol:
        return "origin"
    if x3 > 0:
        return "I" if x4 > 0 else "IV"
    return "II" if x4 > 0 else "III"


def quadrant_classify(fv, standardizer: Standardizer | None = None) -> QuadrantDiagnosis:
    """Read the signs of the 3rd and 4th AR coefficients.

    ``fv`` is taken to be in standardized coordinates unless a
    ``standardizer`` is passed, in which case it is transformed first.
    Quadrant II implicates the conveyor, IV the chain belt.
    """
    values = np.asarray(getattr(fv, "values", fv), dtype=float)
    if values.size < 4:
        raise ValueError("quadrant diagnosis needs at least 4 features")
    if standardizer is not None:
        values = standardizer.transform(values[None, :])[0]
    quadrant = quadrant_of(values[2], values[3])
    return QuadrantDiagnosis(quadrant, frozenset({QUADRANT_EQUIPMENT[quadrant]}))


SCATTER_COLUMNS = ("x3", "x4", "con_state", "cha_state", "predicted", "quadrant")


def scatter_export(samples, path, standardizer: Standardizer | None = None) -> int:
    """Write plot-ready (x3, x4) rows for every sample predicted anomalous.

    ``samples`` holds ``(feature_vector, condition, prediction)`` triples
    where ``condition`` is a "con/cha" string.  Returns the row count.
    """
    written = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCATTER_COLUMNS)
        for fv, condition, predicted in samples:
            if int(predicted) != 1:
                continue
            values = np.asarray(getattr(fv, "values", fv), dtype=float)
            if standardizer is not None:
                values = standardizer.transform(values[None, :])[0]
            con_state, cha_state = condition.split("/")
            writer.writerow([f"{values[2]:.6g}", f"{values[3]:.6g}", con_state, cha_state,
                             int(predicted), quadrant_of(values[2], values[3])])
            written += 1
    return written


def read_scatter(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


