"""Command-line entry point: run, validate and list-catalog."""

import argparse
import logging
import logging.config
import sys

import yaml

from bergman_lab import __version__
from bergman_lab.catalog import get_catalog
from bergman_lab.config import (
    ConfigInvalid,
    LabConfig,
    get_config,
    load_experiment_config,
    validate_config,
)
from bergman_lab.experiments import run_experiment
from bergman_lab.geometry import ModelKind, make_model
from bergman_lab.models import ExperimentConfig, ReportFormat
from bergman_lab.report import Report, write_report

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_TOLERANCE = 2


def configure_logging(config: LabConfig | None = None) -> None:
    """Apply config/logging.yaml, then the BERGMAN_LAB_LOG_LEVEL override."""
    config = config or get_config()
    if config.logging_config.exists():
        with open(config.logging_config) as f:
            logging.config.dictConfig(yaml.safe_load(f))
    else:
        logging.basicConfig(format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.getLogger("bergman_lab").setLevel(config.log_level)
    logger.debug(f"Logging level: {config.log_level}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bergman-lab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="run an experiment and write its report")
    run_parser.add_argument("config", help="experiment JSON file")
    run_parser.add_argument("--seed", type=int, help="override the config seed")
    run_parser.add_argument("--out", help="override the output path")
    run_parser.add_argument(
        "--format", choices=[f.value for f in ReportFormat], help="report format"
    )
    run_parser.add_argument("--threads", type=int, help="worker cap for sample-level parallelism")

    validate_parser = commands.add_parser("validate", help="check an experiment config")
    validate_parser.add_argument("config", help="experiment JSON file")

    commands.add_parser("list-catalog", help="print the psi and phi catalogs")
    return parser


def run(config: ExperimentConfig) -> Report:
    """Execute the experiment and write its report when an output path is set."""
    report = run_experiment(config)
    if config.output:
        write_report(report, config.output, config.format)
    return report


def _overrides(args: argparse.Namespace) -> dict:
    return {"seed": args.seed, "output": args.out, "format": args.format, "threads": args.threads}


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = load_experiment_config(args.config, _overrides(args))
        report = run(config)
    except ConfigInvalid as e:
        for diagnostic in e.diagnostics:
            logger.error(f"{args.config}: {diagnostic}")
        return EXIT_ERROR
    except Exception:
        logger.exception(f"Experiment {args.config} failed")
        return EXIT_ERROR
    if not config.output:
        sys.stdout.write(report.body())
    if not report.passed:
        failed = [name for name, ok in report.checks.items() if not ok]
        logger.warning(f"Tolerance checks failed: {', '.join(failed)}")
        return EXIT_TOLERANCE
    return EXIT_PASS


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        config = load_experiment_config(args.config)
    except ConfigInvalid as e:
        diagnostics = e.diagnostics
    except (OSError, ValueError) as e:
        diagnostics = [f"{args.config}: {e}"]
    else:
        diagnostics = validate_config(config).errors
    for diagnostic in diagnostics:
        print(diagnostic)
    if not diagnostics:
        print(f"{args.config}: ok")
    return EXIT_PASS if not diagnostics else EXIT_ERROR


def cmd_list_catalog(args: argparse.Namespace) -> int:
    catalog = get_catalog()
    for kind in ModelKind:
        model = make_model(kind)
        print(f"{kind.value}")
        for identifier in catalog.weight_ids(kind):
            weight = catalog.weight(model, identifier)
            print(
                f"  psi {identifier:<18} {weight.entry.family:<16} "
                f"sup Levi {weight.levi_sup:.4g}  {weight.entry.params}"
            )
        for identifier in catalog.form_ids(kind):
            form = catalog.test_form(model, identifier)
            print(
                f"  phi {identifier:<18} {form.entry.family:<16} "
                f"C2 bound {form.c2_norm:.4g}  {form.entry.params}"
            )
    return EXIT_PASS


COMMANDS = {"run": cmd_run, "validate": cmd_validate, "list-catalog": cmd_list_catalog}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        return COMMANDS[args.command](args)
    except Exception:
        logger.exception(f"{args.command} failed")
        return EXIT_ERROR
