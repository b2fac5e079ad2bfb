"""Command-line entry point: ``lithoroute <command> --config FILE [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, pipeline
from .config import PipelineConfig, load_config
from .errors import ConfigError, LithorouteError
from .synthetic import write_facies_csv

COMMANDS = ("ingest", "train-base", "calibrate", "classify", "evaluate", "sweep")

DEMO_CONFIG = """\
# Demo configuration over a synthetic facies-style table.
[data]
path = synthetic_facies.csv

[split]
train = SYN-A, SYN-B, SYN-C
val = SYN-D
test = SYN-E, SYN-F

[base]
epochs = 30

[backend]
kind = mock

[run]
root = runs
seed = 0
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lithoroute", description="Confidence-routed lithology classification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="pipeline configuration file")
    common.add_argument("--seed", type=int, help="override [run] seed")
    common.add_argument("--run-dir", help="run directory (default: derived from the config hash)")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    sub.add_parser("ingest", parents=[common], help="load and validate the dataset, fit normalization")
    sub.add_parser("train-base", parents=[common], help="train the base classifier")
    sub.add_parser("calibrate", parents=[common], help="pick the routing threshold on validation wells")
    sub.add_parser("classify", parents=[common], help="run the full pipeline on the test wells")
    ev = sub.add_parser("evaluate", parents=[common], help="score runs and write a comparison table")
    ev.add_argument("--compare", nargs="+", default=[], metavar="RUN_DIR",
                    help="further run directories to include in the table")
    ev.add_argument("--out", help="directory for comparison.csv (default: the first run directory)")
    sw = sub.add_parser("sweep", parents=[common], help="one classify run per parameter value")
    sw.add_argument("--param", required=True, help="dotted parameter, e.g. routing.threshold (aliases: tau, temperature)")
    sw.add_argument("--values", required=True, help="comma-separated values")

    demo = sub.add_parser("demo-data", help="write a synthetic facies-style table and a matching config")
    demo.add_argument("--out", required=True, help="output directory")
    demo.add_argument("--wells", type=int, default=6)
    demo.add_argument("--samples", type=int, default=400)
    demo.add_argument("--seed", type=int, default=0)
    return parser


def _configure(args) -> PipelineConfig:
    cfg = load_config(args.config)
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        cfg = cfg.override(key.strip(), value.strip())
    if args.seed is not None:
        cfg = cfg.override("run.seed", args.seed)
    return cfg


def run(args) -> str:
    if args.command == "demo-data":
        out = Path(args.out)
        write_facies_csv(out / "synthetic_facies.csv", n_wells=args.wells,
                         samples_per_well=args.samples, seed=args.seed)
        (out / "demo.ini").write_text(DEMO_CONFIG)
        return str(out / "demo.ini")
    cfg = _configure(args)
    if args.command == "ingest":
        return str(pipeline.cmd_ingest(cfg))
    if args.command == "train-base":
        return str(pipeline.cmd_train_base(cfg))
    if args.command == "calibrate":
        return str(pipeline.cmd_calibrate(cfg))
    if args.command == "classify":
        return str(pipeline.cmd_classify(cfg, args.run_dir))
    if args.command == "evaluate":
        dirs = ([args.run_dir] if args.run_dir else []) + args.compare
        if args.compare and not args.run_dir:
            dirs.insert(0, str(pipeline.default_run_dir(cfg)))
        table = pipeline.cmd_evaluate(cfg, dirs or None, args.out)
        sys.stdout.write(table.read_text())
        return str(table)
    if args.command == "sweep":
        values = [v.strip() for v in args.values.split(",") if v.strip()]
        return str(pipeline.cmd_sweep(cfg, args.param, values))
    raise AssertionError(args.command)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        print(run(args))
    except (LithorouteError, OSError, ValueError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
