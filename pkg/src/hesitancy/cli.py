"""Command-line interface.

Subcommands mirror the pipeline stages (ingest, stats, split, train, matrix,
report) plus a seeded fixture generator (synth). Exit codes: 0 success,
1 fatal configuration or data error, 2 partial matrix failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config
from .errors import ConfigError, IngestError
from .pipeline import (
    Manifest,
    run_ingest,
    run_matrix,
    run_report,
    run_split,
    run_stats,
    run_train,
)
from .synth import SynthParams, generate

log = logging.getLogger("hesitancy")


def _parse_overrides(items: list[str] | None) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hesitancy",
        description="Zip-level vaccine hesitancy prediction pipeline",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def stage(name: str, help_text: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("-c", "--config", required=True, help="config file path")
        sp.add_argument(
            "--set",
            dest="overrides",
            action="append",
            metavar="KEY=VALUE",
            help="override a config key (repeatable)",
        )
        return sp

    stage("ingest", "parse, geolocate, filter, and join the corpus")
    stage("stats", "emit the per-metro corpus statistics table")
    stage("split", "persist the stratified train/test split")
    tr = stage("train", "fit a single model cell and save its parameters")
    tr.add_argument("--cell", required=True, help="cell id, e.g. text_only|svr_rbf|zip|nosent")
    stage("matrix", "run the full model matrix and the constant baselines")
    stage("report", "error-analysis report for a matrix cell")

    sy = sub.add_parser("synth", help="generate a synthetic input fixture")
    sy.add_argument("--out", required=True, help="output directory")
    sy.add_argument("--seed", type=int, default=7)
    sy.add_argument("--zips", type=int, default=20)
    sy.add_argument("--dim", type=int, default=300)
    sy.add_argument("--linear", action="store_true", help="plant a linear signal instead")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "synth":
            paths = generate(
                args.out,
                SynthParams(
                    n_zips=args.zips, dim=args.dim, seed=args.seed, nonlinear=not args.linear
                ),
            )
            log.info("fixture written; config at %s", paths["config"])
            return 0

        overrides = _parse_overrides(args.overrides)
        cfg = load_config(args.config, overrides)
        manifest = Manifest(cfg, args.command, overrides)
        code = 0
        if args.command == "ingest":
            result = run_ingest(cfg, manifest)
            for key, value in sorted(result.counts.items()):
                log.info("ingest %s: %d", key, value)
        elif args.command == "stats":
            run_stats(cfg, manifest)
        elif args.command == "split":
            run_split(cfg, manifest)
        elif args.command == "train":
            result = run_train(cfg, args.cell, manifest)
            log.info(
                "cell %s: tweet %.6f cv %.6f zip %.6f",
                args.cell, result.tweet_rmse, result.cv_rmse, result.zip_rmse,
            )
        elif args.command == "matrix":
            code = run_matrix(cfg, manifest)
        elif args.command == "report":
            _analysis, chosen = run_report(cfg, manifest)
            log.info("report written for cell %s", chosen)
        manifest.write(cfg.out_dir)
        return code
    except (ConfigError, IngestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
