"""End-to-end experiment: synthesize recordings, extract AR features, train
one-class SVMs per (distance, channel, kernel) cell and evaluate them."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import signal as sig
from .armodel import CONDITIONS, extract_features
from .evaluation import (DegenerateStatisticError, cohens_d, feature_sweep, paired_t_test,
                         report, scatter_export, sig6)
from .kernels import KernelConfig, fit_standardizer
from .ocsvm import OcSvmConfig, OcSvmModel, fit_detector, predict_features
from .quantumsim import FeatureMapConfig

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
FEATURES = "features.csv"
TABLE_COLUMNS = ("distance", "channel", "kernel", "accuracy", "f1", "tp", "fn", "fp", "tn")
SCOPES = ("test", "all")


class PipelineError(RuntimeError):
    """Invalid inputs or inconsistent artifacts; the CLI exits with status 1."""


def _default_kernels() -> list[dict]:
    return [
        {"name": "quantum", "kind": "quantum", "feature_map": FeatureMapConfig().to_dict()},
        {"name": "rbf", "kind": "rbf", "gamma": None},
    ]


@dataclass
class ExperimentConfig:
    counts: dict = field(default_factory=lambda: {"0/0": 60, "0/1": 30, "1/0": 30, "1/1": 30})
    n_train: int = 40
    distances: list = field(default_factory=lambda: [0.0, 1.0, 2.0, 3.0])
    channels: list = field(default_factory=lambda: list(sig.CHANNELS))
    ar_order: int = 5
    kernels: list = field(default_factory=_default_kernels)
    ocsvm: dict = field(default_factory=lambda: OcSvmConfig().to_dict())
    gamma_grid: list = field(default_factory=lambda: [0.01, 0.1, 0.5, 1.0, 2.0, 10.0])
    seed: int = 0
    output_dir: str = "qkad-run"
    sample_rate_hz: int = sig.DEFAULT_SAMPLE_RATE
    window: int = sig.DEFAULT_WINDOW
    recording_s: float | None = None
    noise_floor_db: float = 34.0
    anomaly_impulse_rate_hz: float = 40.0
    eval_scope: str = "test"
    sweep: bool = True
    cell_time_budget_s: float = 60.0

    def __post_init__(self):
        if set(self.counts) != set(CONDITIONS):
            raise PipelineError(f"counts must cover exactly {CONDITIONS}")
        if not 2 <= self.n_train <= self.counts["0/0"]:
            raise PipelineError("n_train must lie between 2 and the normal count")
        if self.ar_order < 1 or self.window <= self.ar_order:
            raise PipelineError("invalid ar_order / window")
        if self.eval_scope not in SCOPES:
            raise PipelineError(f"eval_scope must be one of {SCOPES}")
        names = [k.get("name", k["kind"]) for k in self.kernels]
        if len(set(names)) != len(names):
            raise PipelineError("kernel names must be unique")
        for ch in self.channels:
            sig.channel_mix(ch, 0.0)
        self.distances = [float(d) for d in self.distances]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise PipelineError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise PipelineError(str(exc)) from exc

    @classmethod
    def load(cls, path, **overrides) -> "ExperimentConfig":
        data = {}
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def kernel_configs(self) -> dict[str, KernelConfig]:
        out = {}
        for spec in self.kernels:
            spec = dict(spec)
            name = spec.pop("name", spec["kind"])
            if spec["kind"] == "quantum":
                fm = FeatureMapConfig(**{**(spec.get("feature_map") or {}), "n_qubits": self.ar_order})
                spec["feature_map"] = fm.to_dict()
            out[name] = KernelConfig.from_dict(spec)
        return out

    def ocsvm_config(self) -> OcSvmConfig:
        return OcSvmConfig(**self.ocsvm)

    @property
    def duration_s(self) -> float:
        return self.recording_s or self.window / self.sample_rate_hz


def _cell_key(distance: float, channel: str) -> str:
    return f"d{distance:g}_{channel}"


def _scene_seed(seed: int, distance_idx: int, cond_idx: int, rep: int) -> int:
    # shared by every channel: the channels hear the same physical scene
    return int(np.random.SeedSequence([seed, distance_idx, cond_idx, rep]).generate_state(1)[0])


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _echo_config(cfg: ExperimentConfig, out: Path) -> None:
    _write_json(out / "config.effective.json", cfg.to_dict())


# -- synth ---------------------------------------------------------------------

def synth(cfg: ExperimentConfig, out_dir=None) -> Path:
    """Render every recording as a WAV file and write the manifest."""
    out = Path(out_dir or Path(cfg.output_dir) / "dataset")
    try:
        (out / "audio").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PipelineError(f"cannot write dataset to {out}: {exc}") from exc

    entries = []
    for di, distance in enumerate(cfg.distances):
        for channel in cfg.channels:
            con_gain, cha_gain = sig.channel_mix(channel, distance)
            cell_dir = out / "audio" / _cell_key(distance, channel)
            cell_dir.mkdir(exist_ok=True)
            for ci, cond in enumerate(CONDITIONS):
                con_state, cha_state = (int(s) for s in cond.split("/"))
                for rep in range(cfg.counts[cond]):
                    scene = sig.SceneConfig(
                        con_state=con_state, cha_state=cha_state, distance_m=distance,
                        noise_floor_db=cfg.noise_floor_db,
                        anomaly_impulse_rate_hz=cfg.anomaly_impulse_rate_hz,
                        seed=_scene_seed(cfg.seed, di, ci, rep),
                        con_gain_db=con_gain, cha_gain_db=cha_gain,
                        sample_rate_hz=cfg.sample_rate_hz)
                    ts = sig.synthesize_scene(sig.CONVEYOR, sig.CHAIN_BELT, scene, cfg.duration_s)
                    name = f"{cond.replace('/', '')}_{rep:03d}.wav"
                    sig.write_wav(cell_dir / name, ts)
                    split = "train" if cond == "0/0" and rep < cfg.n_train else "test"
                    entries.append({
                        "file": str(Path("audio") / _cell_key(distance, channel) / name),
                        "con_state": con_state, "cha_state": cha_state,
                        "distance_m": distance, "channel": channel, "split": split,
                    })
    manifest = {"seed": cfg.seed, "sample_rate_hz": cfg.sample_rate_hz,
                "window": cfg.window, "entries": entries}
    _write_json(out / MANIFEST, manifest)
    return out


def load_manifest(dataset_dir) -> dict:
    path = Path(dataset_dir) / MANIFEST
    if not path.exists():
        raise PipelineError(f"no manifest at {path}")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# -- features ------------------------------------------------------------------

def feature_columns(p: int) -> list[str]:
    return [f"phi_{i}" for i in range(1, p + 1)]


def features(cfg: ExperimentConfig, dataset_dir, out_path=None) -> Path:
    """One AR-coefficient row per segment of every manifest entry."""
    dataset_dir = Path(dataset_dir)
    manifest = load_manifest(dataset_dir)
    out_path = Path(out_path or Path(cfg.output_dir) / FEATURES)
    rows, problems = [], []
    for entry in manifest["entries"]:
        try:
            ts = sig.load_wav(dataset_dir / entry["file"])
            segments = sig.segment(ts, cfg.window, cfg.window)
            vecs = [extract_features(s, cfg.ar_order).values for s in segments]
        except (OSError, ValueError) as exc:
            problems.append(f"{entry['file']}: {exc}")
            continue
        for k, v in enumerate(vecs):
            rows.append([*(f"{x:.12g}" for x in v), entry["con_state"], entry["cha_state"],
                         f"{entry['distance_m']:g}", entry["channel"], entry["split"],
                         entry["file"], k])
    if problems:
        raise PipelineError("unreadable recordings:\n  " + "\n  ".join(problems))
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(feature_columns(cfg.ar_order)
                        + ["con_state", "cha_state", "distance_m", "channel", "split", "file", "segment"])
        writer.writerows(rows)
    return out_path


@dataclass
class FeatureTable:
    X: np.ndarray
    con: np.ndarray
    cha: np.ndarray
    distance: np.ndarray
    channel: np.ndarray
    split: np.ndarray

    @property
    def labels(self) -> np.ndarray:
        return ((self.con + self.cha) > 0).astype(int)

    @property
    def conditions(self) -> np.ndarray:
        return np.array([f"{a}/{b}" for a, b in zip(self.con, self.cha)])

    def cell(self, distance: float, channel: str) -> np.ndarray:
        return (self.distance == distance) & (self.channel == channel)


def read_features(path) -> FeatureTable:
    path = Path(path)
    if not path.exists():
        raise PipelineError(f"no feature table at {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        phi = [c for c in reader.fieldnames if c.startswith("phi_")]
        records = list(reader)
    if not records:
        raise PipelineError(f"{path} has no rows")
    col = lambda name, conv: np.array([conv(r[name]) for r in records])
    return FeatureTable(
        X=np.array([[float(r[c]) for c in phi] for r in records]),
        con=col("con_state", int), cha=col("cha_state", int),
        distance=col("distance_m", float), channel=col("channel", str),
        split=col("split", str))


# -- train ---------------------------------------------------------------------

def _model_path(models_dir: Path, kernel: str, distance: float, channel: str) -> Path:
    return models_dir / f"{kernel}_{_cell_key(distance, channel)}.json"


def train_models(cfg: ExperimentConfig, features_path, models_dir=None) -> list[Path]:
    table = read_features(features_path)
    models_dir = Path(models_dir or Path(cfg.output_dir) / "models")
    models_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for distance in cfg.distances:
        for channel in cfg.channels:
            mask = table.cell(distance, channel) & (table.split == "train")
            if np.any(table.labels[mask] != 0):
                raise PipelineError("training split contains anomalous rows")
            X = table.X[mask]
            if X.shape[0] < 2:
                raise PipelineError(f"cell {_cell_key(distance, channel)}: fewer than 2 training normals")
            for name, kcfg in cfg.kernel_configs().items():
                start = time.perf_counter()
                model = fit_detector(X, kcfg, cfg.ocsvm_config(), cfg.gamma_grid)
                elapsed = time.perf_counter() - start
                model.meta.update({"distance": distance, "channel": channel, "kernel": name,
                                   "n_train": int(X.shape[0]), "fingerprint": model.fingerprint(),
                                   "train_wall_s": round(elapsed, 4)})
                path = _model_path(models_dir, name, distance, channel)
                model.save(path)
                written.append(path)
    return written


# -- eval ----------------------------------------------------------------------

def _mean_by_distance(cells: list[dict], kernel: str, metric: str, distances) -> list[float]:
    return [float(np.mean([c["metrics"][metric] for c in cells
                           if c["kernel"] == kernel and c["distance"] == d])) for d in distances]


def compare_kernels(cells: list[dict], distances, a: str = "quantum", b: str = "rbf") -> dict:
    """Paired t-test and Cohen's d on channel-averaged metrics per distance."""
    block = {"kernels": [a, b], "pairing": "distance (channel-averaged)",
             "conventions": {"t_test": "paired, two-sided, sample sd (n-1)",
                             "cohens_d": "(mean_a - mean_b) / sqrt((s_a^2 + s_b^2) / 2)",
                             "positive_class": "anomaly"}}
    for metric in ("accuracy", "f1"):
        va = _mean_by_distance(cells, a, metric, distances)
        vb = _mean_by_distance(cells, b, metric, distances)
        entry = {a: [sig6(v) for v in va], b: [sig6(v) for v in vb]}
        try:
            t, df, p = paired_t_test(va, vb)
            entry.update({"t": sig6(t), "df": df, "p": sig6(p)})
        except (DegenerateStatisticError, ValueError) as exc:
            entry.update({"t": None, "df": len(va) - 1, "p": None, "t_error": str(exc)})
        try:
            entry["d"] = sig6(cohens_d(va, vb))
        except (DegenerateStatisticError, ValueError) as exc:
            entry.update({"d": None, "d_error": str(exc)})
        block[metric] = entry
    return block


def _check_kernel(model: OcSvmModel, expected: KernelConfig, path: Path) -> None:
    got = model.kernel_config
    same = got.kind == expected.kind and got.standardize == expected.standardize
    if same and expected.kind == "quantum":
        same = got.feature_map == expected.feature_map
    if same and expected.kind == "rbf" and expected.gamma is not None:
        same = got.gamma == expected.gamma
    if not same:
        raise PipelineError(f"{path.name}: kernel config differs from the experiment config")


def evaluate(cfg: ExperimentConfig, features_path, models_dir=None, out_dir=None) -> dict:
    table = read_features(features_path)
    models_dir = Path(models_dir or Path(cfg.output_dir) / "models")
    out = Path(out_dir or cfg.output_dir)
    (out / "scatter").mkdir(parents=True, exist_ok=True)
    kernels = cfg.kernel_configs()
    cells, sweep_rows = [], []

    for distance in cfg.distances:
        for channel in cfg.channels:
            in_cell = table.cell(distance, channel)
            train_mask = in_cell & (table.split == "train")
            eval_mask = in_cell if cfg.eval_scope == "all" else in_cell & (table.split == "test")
            for name in kernels:
                path = _model_path(models_dir, name, distance, channel)
                if not path.exists():
                    raise PipelineError(f"missing model {path}")
                model = OcSvmModel.load(path)
                _check_kernel(model, kernels[name], path)
                expected = fit_standardizer(table.X[train_mask]) if model.kernel_config.standardize else None
                check = OcSvmModel(model.alphas, model.rho, model.support_indices, model.config,
                                   model.kernel_config, expected)
                if not check.fingerprint() == model.fingerprint() == model.meta.get("fingerprint"):
                    raise PipelineError(f"{path.name}: model does not match the feature table "
                                        "(standardizer/config hash mismatch)")
                start = time.perf_counter()
                X_eval = table.X[eval_mask]
                preds = predict_features(model, X_eval)
                rep, cm = report(preds, table.labels[eval_mask], table.conditions[eval_mask])
                elapsed = time.perf_counter() - start + model.meta.get("train_wall_s", 0.0)
                if elapsed > cfg.cell_time_budget_s:
                    log.warning("cell %s/%s exceeded its time budget (%.1fs)", path.name, name, elapsed)
                cells.append({
                    "distance": distance, "channel": channel, "kernel": name,
                    "metrics": rep.to_dict(), "confusion": cm.to_dict(),
                    "hyperparameters": {"kernel": model.kernel_config.to_dict(),
                                        "ocsvm": model.config.to_dict(),
                                        "n_train": model.n_train, "eval_scope": cfg.eval_scope},
                    "wall_s": round(elapsed, 4),
                })
                samples = list(zip(X_eval, table.conditions[eval_mask], preds))
                scatter_export(samples, out / "scatter" / f"{name}_{_cell_key(distance, channel)}.csv",
                               fit_standardizer(table.X[train_mask]))
                if cfg.sweep:
                    base = kernels[name]
                    for row in feature_sweep(table.X[train_mask], X_eval, table.labels[eval_mask],
                                             base, cfg.ocsvm_config(), cfg.gamma_grid):
                        sweep_rows.append([f"{distance:g}", channel, name, row["k"],
                                           f"{row['accuracy']:.6g}", f"{row['f1']:.6g}"])

    result = {"config": cfg.to_dict(), "cells": cells}
    if {"quantum", "rbf"} <= set(kernels):
        result["statistics"] = compare_kernels(cells, cfg.distances)

    _write_json(out / "run_result.json", result)
    with open(out / "table.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        for c in cells:
            m, cm = c["metrics"], c["confusion"]
            writer.writerow([f"{c['distance']:g}", c["channel"], c["kernel"],
                             f"{m['accuracy']:.6g}", f"{m['f1']:.6g}",
                             cm["tp"], cm["fn"], cm["fp"], cm["tn"]])
    if cfg.sweep:
        with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["distance", "channel", "kernel", "k", "accuracy", "f1"])
            writer.writerows(sweep_rows)
    return result


def check_properties(result: dict, floor: float = 0.90) -> list[str]:
    """Directional checks on channel-averaged accuracy; returns failures."""
    cells = result["cells"]
    distances = sorted({c["distance"] for c in cells})
    kernels = {c["kernel"] for c in cells}
    if not {"quantum", "rbf"} <= kernels:
        return ["--check needs both a 'quantum' and an 'rbf' kernel"]
    q = _mean_by_distance(cells, "quantum", "accuracy", distances)
    r = _mean_by_distance(cells, "rbf", "accuracy", distances)
    failures = []
    if q[-1] < r[-1]:
        failures.append(f"quantum accuracy {q[-1]:.4f} < rbf {r[-1]:.4f} at {distances[-1]:g} m")
    failures += [f"quantum accuracy {a:.4f} < {floor} at {d:g} m"
                 for d, a in zip(distances, q) if a < floor]
    return failures


def bench(cfg: ExperimentConfig) -> dict:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(cfg, out)
    dataset = synth(cfg, out / "dataset")
    feats = features(cfg, dataset, out / FEATURES)
    train_models(cfg, feats, out / "models")
    return evaluate(cfg, feats, out / "models", out)
