"""Command-line entry point: ``hybridrag {index,retrieve,generate,evaluate,report,run}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import PipelineConfig, load_config
from .errors import HybridRagError
from .pipeline import cmd_evaluate, cmd_generate, cmd_index, cmd_report, cmd_retrieve, run_all


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="pipeline config file (YAML or JSON)")
    common.add_argument("--preset", action="append", default=None,
                        help="preset name; repeatable; 'all' for every preset (default: all)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--parallelism", type=int, default=None)
    common.add_argument("--fail-fast", action="store_true", help="abort on the first generation failure")
    common.add_argument("--format", choices=("json", "md", "csv"), default="md",
                        help="table format for evaluate/report (JSON is always written)")
    common.add_argument("--output-dir", default=None, help="override output_dir from the config")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hybridrag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("index", parents=[common], help="chunk the corpus and build all indexes")
    sub.add_parser("retrieve", parents=[common], help="rank chunks for every question")
    sub.add_parser("generate", parents=[common], help="generate answers from the rankings")
    sub.add_parser("evaluate", parents=[common], help="score rankings and answers")
    sub.add_parser("report", parents=[common], help="combined table across presets")
    sub.add_parser("run", parents=[common], help="index, then retrieve/generate/evaluate every preset, then report")
    return parser


def _presets(cfg: PipelineConfig, requested: list[str] | None) -> list[str]:
    if not requested or "all" in requested:
        return cfg.preset_names()
    return requested


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.parallelism is not None:
        overrides["parallelism"] = args.parallelism
    if args.fail_fast:
        overrides["fail_fast"] = True
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir

    try:
        cfg = load_config(args.config, **overrides)
        presets = _presets(cfg, args.preset)
        if args.command == "index":
            summary = cmd_index(cfg)
            print(", ".join(f"{k}={v}" for k, v in summary.items()))
        elif args.command == "run":
            print(run_all(cfg, presets, args.format))
        elif args.command == "report":
            print(cmd_report(cfg, presets, args.format))
        else:
            for name in presets:
                pcfg = cfg.with_preset(name)
                if args.command == "retrieve":
                    print(cmd_retrieve(pcfg))
                elif args.command == "generate":
                    print(cmd_generate(pcfg))
                elif args.command == "evaluate":
                    cmd_evaluate(pcfg, args.format)
                    print(pcfg.output_path / "reports" / name)
    except HybridRagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
