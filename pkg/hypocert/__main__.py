"""
Command line entry point.

Usage:
    python -m hypocert run CONFIG_OR_PRESET [--output-dir D] [--tasks a,b,c] [--seed S] [--strict] [-v]
    python -m hypocert presets list
    python -m hypocert presets show NAME
    python -m hypocert version
"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path

from dotenv import load_dotenv

from hypocert.config_flow import load_document, parse_config
from hypocert.const import EXIT_CERTIFICATE, EXIT_OK, ENV_LOG_LEVEL, VERSION
from hypocert.errors import ConfigError, HypocertError
from hypocert.presets import preset_document, preset_names
from hypocert.report import report_json, write_report
from hypocert.verification_data import run

_LOGGER = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypocert", description="Numerical certificates for hypoelliptic multiplier estimates")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="Increase logging verbosity (-v info, -vv debug)")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="Run a config file or a named preset")
    run_parser.add_argument("config", help="Path to a JSON/YAML config or a preset name")
    run_parser.add_argument("--output-dir", "-o", help="Directory for report.json and the CSV tables")
    run_parser.add_argument("--tasks", help="Comma separated subset of kalman,exponents,build,verify-pointwise,verify-spectral")
    run_parser.add_argument("--seed", type=int, help="Override the ensemble seed")
    run_parser.add_argument("--strict", action="store_true", help="Exit with 1 when a certificate or a numerical check does not pass")

    presets_parser = commands.add_parser("presets", help="List or show the shipped presets")
    presets_commands = presets_parser.add_subparsers(dest="presets_command", required=True)
    presets_commands.add_parser("list", help="List preset names")
    show = presets_commands.add_parser("show", help="Print a preset config")
    show.add_argument("name")

    commands.add_parser("version", help="Print the tool version")
    return parser


def setup_logging(verbose: int) -> None:
    default = os.getenv(ENV_LOG_LEVEL, "WARNING").upper()
    level = {0: default, 1: "INFO"}.get(verbose, "DEBUG")
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def resolve_document(target: str) -> dict:
    """A config file when target is a path, otherwise the preset of that name."""
    path = Path(target)
    if path.is_file():
        return load_document(path)
    if target in preset_names():
        return preset_document(target)
    raise ConfigError("preset_unknown", preset=target, available=preset_names())


def apply_overrides(document: dict, args: argparse.Namespace) -> dict:
    document = dict(document)
    if args.output_dir:
        document["output_dir"] = args.output_dir
    if args.tasks:
        document["tasks"] = [task.strip() for task in args.tasks.split(",") if task.strip()]
    if args.seed is not None and document.get("spectral"):
        spectral = dict(document["spectral"])
        spectral["ensemble"] = dict(spectral.get("ensemble") or {}, seed=args.seed)
        document["spectral"] = spectral
    return document


def command_run(args: argparse.Namespace) -> int:
    try:
        config = parse_config(apply_overrides(resolve_document(args.config), args))
    except HypocertError as e:
        print(json.dumps({"errors": [e.record]}, sort_keys=True, indent=2))
        return e.exit_code

    report = run(config)
    if config.output_dir:
        write_report(report, config.output_dir)
    else:
        sys.stdout.write(report_json(report))

    if report.exit_code != EXIT_OK:
        return report.exit_code
    if args.strict and not report.all_checks_passed:
        return EXIT_CERTIFICATE
    return EXIT_OK


def command_presets(args: argparse.Namespace) -> int:
    if args.presets_command == "list":
        for name in preset_names():
            print(name)
        return EXIT_OK
    try:
        document = preset_document(args.name)
    except ConfigError as e:
        print(json.dumps({"errors": [e.record]}, sort_keys=True, indent=2))
        return e.exit_code
    print(json.dumps(document, sort_keys=True, indent=2))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    if args.command == "version":
        print(VERSION)
        return EXIT_OK
    if args.command == "presets":
        return command_presets(args)
    return command_run(args)


if __name__ == "__main__":
    sys.exit(main())
