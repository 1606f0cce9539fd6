"""``flagbench`` command line.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import (
    ConfigError,
    ExperimentConfig,
    NumericalError,
    report_diff,
    report_json,
    run_experiment,
    validate_report,
)

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_SUBCOMMAND_EXPERIMENTS = {
    "simulate": ("prep", "prep-plus-idles", "prep-plus-stabilizer"),
    "protocol": ("ideal-protocol", "hardware-protocol"),
    "tomo": ("tomo",),
    "fit": ("fit",),
    "route": ("route",),
}


def load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path!r} does not exist")
    text = p.read_bytes()
    try:
        if p.suffix == ".toml":
            return tomllib.loads(text.decode("utf-8"))
        return json.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def _layout(text: str):
    if text in ("A", "B", "C"):
        return text
    try:
        return [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError("layout is A, B, C or comma-separated device qubits") from exc


def _common(p: argparse.ArgumentParser, experiments: tuple[str, ...]) -> None:
    p.add_argument("--config", help="TOML or JSON experiment config")
    if len(experiments) > 1:
        p.add_argument("--experiment", choices=experiments)
    p.add_argument("--device", help="bundled device name or device JSON path")
    p.add_argument("--seed", type=int)
    p.add_argument("--shots", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--layout", type=_layout)
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--workers", type=int, help="parallel replicas; results do not depend on it")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flagbench", description="Flag-qubit QEC benchmarks in simulation.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, experiments in _SUBCOMMAND_EXPERIMENTS.items():
        p = sub.add_parser(name, help=f"run {' / '.join(experiments)}")
        _common(p, experiments)
        if name in ("tomo", "route"):
            p.add_argument("--circuit", help="QASM file")
        if name == "fit":
            p.add_argument("--input", help="density JSON or a report carrying a state")
            p.add_argument("--fault-qubits", type=lambda s: [int(x) for x in s.split(",")])
    d = sub.add_parser("report-diff", help="compare two reports")
    d.add_argument("a")
    d.add_argument("b")
    return ap


def config_from_args(args) -> ExperimentConfig:
    data = load_config_file(args.config) if args.config else {}
    allowed = _SUBCOMMAND_EXPERIMENTS[args.command]
    if getattr(args, "experiment", None):
        data["experiment"] = args.experiment
    data.setdefault("experiment", allowed[0])
    if data["experiment"] not in allowed:
        raise ConfigError(f"{args.command} runs {', '.join(allowed)}, not {data['experiment']!r}")
    for key in ("device", "seed", "shots", "replicas", "layout", "out", "workers", "circuit", "input", "fault_qubits"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    try:
        return ExperimentConfig.from_mapping(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _read_report(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read report {path}: {exc}") from exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report-diff":
            sys.stdout.write(report_diff(_read_report(args.a), _read_report(args.b)))
            return EXIT_OK
        cfg = config_from_args(args)
        report = run_experiment(cfg)
        validate_report(report)
        text = report_json(report)
        if cfg.out:
            Path(cfg.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
