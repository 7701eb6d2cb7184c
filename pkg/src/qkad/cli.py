"""Command line entry point: ``qkad {synth,features,train,eval,bench,state}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .pipeline import ExperimentConfig, PipelineError

EXIT_OK, EXIT_INVALID, EXIT_CHECK = 0, 1, 2


def _config(args) -> ExperimentConfig:
    return ExperimentConfig.load(args.config, seed=args.seed, output_dir=args.output_dir)


def cmd_synth(args) -> int:
    cfg = _config(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    pipeline._echo_config(cfg, out)
    path = pipeline.synth(cfg, out / "dataset")
    entries = pipeline.load_manifest(path)["entries"]
    print(f"wrote {len(entries)} recordings to {path}")
    return EXIT_OK


def cmd_features(args) -> int:
    cfg = _config(args)
    dataset = Path(args.dataset or Path(cfg.output_dir) / "dataset")
    path = pipeline.features(cfg, dataset, Path(cfg.output_dir) / pipeline.FEATURES)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    feats = Path(args.features or Path(cfg.output_dir) / pipeline.FEATURES)
    paths = pipeline.train_models(cfg, feats, Path(cfg.output_dir) / "models")
    print(f"trained {len(paths)} models")
    return EXIT_OK


def _summarise(result: dict) -> None:
    for c in result["cells"]:
        m = c["metrics"]
        print(f"{c['distance']:>4g} m  {c['channel']}  {c['kernel']:<8} "
              f"acc={m['accuracy']:.4f}  f1={m['f1']:.4f}")
    stats = result.get("statistics")
    if stats:
        for metric in ("accuracy", "f1"):
            s = stats[metric]
            print(f"{metric}: t={s['t']} df={s['df']} p={s['p']} d={s['d']}")


def _finish(result: dict, check: bool) -> int:
    _summarise(result)
    if check:
        failures = pipeline.check_properties(result)
        for f in failures:
            print(f"CHECK FAILED: {f}", file=sys.stderr)
        if failures:
            return EXIT_CHECK
        print("all checks passed")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    out = Path(cfg.output_dir)
    feats = Path(args.features or out / pipeline.FEATURES)
    models = Path(args.models or out / "models")
    return _finish(pipeline.evaluate(cfg, feats, models, out), args.check)


def cmd_bench(args) -> int:
    return _finish(pipeline.bench(_config(args)), args.check)


def cmd_state(args) -> int:
    from .quantumsim import FeatureMapConfig, feature_map_state

    x = [float(v) for v in args.x.split(",")]
    cfg = FeatureMapConfig(n_qubits=len(x), repetitions=args.repetitions,
                           entangler=args.entangler,
                           angle_scale=FeatureMapConfig().angle_scale if args.scale is None else args.scale)
    amps = feature_map_state(np.array(x), cfg).amplitudes
    json.dump({"feature_map": cfg.to_dict(), "amplitudes": [[a.real, a.imag] for a in amps]},
              sys.stdout, indent=1)
    print()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qkad", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int)
        p.add_argument("--output-dir")
        return p

    common(sub.add_parser("synth", help="render the synthetic dataset")).set_defaults(func=cmd_synth)
    p = common(sub.add_parser("features", help="extract AR features"))
    p.add_argument("--dataset")
    p.set_defaults(func=cmd_features)
    p = common(sub.add_parser("train", help="train one model per cell"))
    p.add_argument("--features")
    p.set_defaults(func=cmd_train)
    p = common(sub.add_parser("eval", help="evaluate trained models"))
    p.add_argument("--features")
    p.add_argument("--models")
    p.add_argument("--check", action="store_true")
    p.set_defaults(func=cmd_eval)
    p = common(sub.add_parser("bench", help="synth, features, train and eval in one go"))
    p.add_argument("--check", action="store_true")
    p.set_defaults(func=cmd_bench)
    p = sub.add_parser("state", help="dump a feature-map state as JSON")
    p.add_argument("x", help="comma-separated feature values")
    p.add_argument("--repetitions", type=int, default=2)
    p.add_argument("--entangler", default="linear_chain")
    p.add_argument("--scale", type=float)
    p.set_defaults(func=cmd_state)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PipelineError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
