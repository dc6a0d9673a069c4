"""
Command-line front end.

    sim [run] --config soc.json --experiment experiments/stride_sweep.json --out results/ [--seed N] [--jobs N]
    sim validate --config soc.json [--experiment experiment.json]
"""
import argparse
import logging
import sys
import typing as t
from dataclasses import replace
from pathlib import Path

from ulp_memsim._config import DEFAULT_RUN_LIMITS, RunLimits
from ulp_memsim.config import SocConfig, default_config, load_config_file
from ulp_memsim.errors import BaseMemSimError, MemSimError
from ulp_memsim.harness import emit_csv, load_experiment_file, run_experiment


logger = logging.getLogger(__name__)

COMMANDS = ("run", "validate")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    parser = argparse.ArgumentParser(prog="sim", description="SoC memory-hierarchy and offload simulator")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", parents=[common], help="run one experiment and write its CSV")
    run.add_argument("--config", type=Path, help="SoC configuration; the shipped default when omitted")
    run.add_argument("--experiment", type=Path, required=True)
    run.add_argument("--out", type=Path, required=True, help="output directory")
    run.add_argument("--seed", type=int, help="overrides the experiment's seed")
    run.add_argument("--jobs", type=int, default=DEFAULT_RUN_LIMITS.max_concurrency, help="points run at once")

    validate = commands.add_parser("validate", parents=[common], help="check a configuration and an experiment")
    validate.add_argument("--config", type=Path)
    validate.add_argument("--experiment", type=Path)
    return parser


def _config(path: t.Optional[Path]) -> SocConfig:
    return default_config() if path is None else load_config_file(path)


def _run(args: argparse.Namespace) -> None:
    cfg = _config(args.config)
    experiment = load_experiment_file(args.experiment)
    if args.seed is not None:
        experiment = replace(experiment, seed=args.seed)
    if args.jobs < 1:
        raise MemSimError("--jobs must be at least 1")

    table = run_experiment(cfg, experiment, RunLimits(max_concurrency=args.jobs))
    try:
        args.out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise MemSimError("cannot create {path}: {err}".format(path=args.out, err=err.strerror))
    path = emit_csv(table, args.out / "{name}.csv".format(name=experiment.output_name))
    print(path)


def _validate(args: argparse.Namespace) -> None:
    _config(args.config)
    if args.experiment is not None:
        load_experiment_file(args.experiment)
    print("ok")


def main(argv: t.Optional[t.Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in COMMANDS + ("-h", "--help"):
        argv.insert(0, "run")
    args = _parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "validate":
            _validate(args)
        else:
            _run(args)
    except BaseMemSimError as err:
        print("sim: error: {err}".format(err=err), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
