"""Command line entry point.

Exit codes: 0 on success, 1 when the configuration or arguments are invalid,
2 when a stage fails (missing upstream artifact, unreadable data, divergence).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .benchmark import benchmark_config
from .config import MODES, ConfigError, load_config
from .pipeline import Pipeline

EXIT_OK, EXIT_INVALID, EXIT_STAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON pipeline config (default: the surrogate benchmark)")
    common.add_argument("--seed", type=int, help="run a single seed instead of the configured list")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--mode", choices=MODES, help="partition mode for train/generate")
    p = argparse.ArgumentParser(prog="pdmsynth", description="Diffusion-based synthetic fault data for PdM.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (
        ("ingest", "read runs and write the windowed dataset"),
        ("partition", "split the dataset into A and U (plus leave-target-out manifests)"),
        ("train", "train the generator for --mode"),
        ("generate", "generate the synthetic counterpart of U for --mode"),
        ("evaluate", "compute metrics and the three-batch experiment"),
        ("pipeline", "run every stage, reusing cached artifacts"),
    ):
        sub.add_parser(name, parents=[common], help=text)
    return p


def resolve_config(args):
    cfg = load_config(args.config) if args.config else benchmark_config()
    if args.out:
        cfg.out = args.out
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.mode:
        cfg.mode = args.mode
    return cfg.validate()


def _targets_for(pipe: Pipeline, mode: str):
    return pipe.targets if mode == "leave-target-out" else [None]


def run(args, cfg) -> None:
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    pipe = Pipeline(cfg, compute_upstream=args.command == "pipeline")
    cmd = args.command
    if cmd == "ingest":
        pipe.ingest()
    elif cmd == "partition":
        pipe.partition()
    elif cmd in ("train", "generate"):
        stage = pipe.train if cmd == "train" else pipe.generate
        for s in cfg.seeds:
            for t in _targets_for(pipe, cfg.mode):
                stage(cfg.mode, s, t)
    elif cmd == "evaluate":
        pipe.evaluate()
    else:
        pipe.run_all()
        fresh = len(pipe.computed)
        print(f"pipeline: {fresh} stage(s) computed, reports in {cfg.out}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (ConfigError, OSError, TypeError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        run(args, cfg)
    except Exception as exc:  # noqa: BLE001 - every stage failure maps to one exit code
        print(f"error: {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
