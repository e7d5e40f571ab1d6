"""Command line: one subcommand per experiment.

Exit codes: 0 success, 1 config error, 2 runtime or solver error, 3 a
validation check failed.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .channel import NOISE_MODES, SNR_REFERENCES
from .experiments import (
    ConfigError,
    ExperimentConfig,
    config_from_dict,
    merge_overrides,
    read_config_file,
    run_experiment,
)

SUBCOMMANDS = {
    "convergence": "convergence",
    "snr-sweep": "snr_sweep",
    "irs-sweep": "irs_sweep",
    "validate": "validate",
}


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irsfp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML config file; flags override its keys")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--max-iter", type=int)
        p.add_argument("--noise-mode", choices=NOISE_MODES)
        p.add_argument("--dual-method", choices=("ellipsoid", "barrier"))
        p.add_argument("--out", help="raw CSV path (summary files are written next to it)")
        p.add_argument("--snr-db", type=float, help="operating point for convergence and irs-sweep")
        p.add_argument("--snr-reference", choices=SNR_REFERENCES)
        p.add_argument("--schemes", type=lambda s: [x for x in s.split(",") if x])
        p.add_argument("--workers", type=int)
        p.add_argument("--timing", action="store_true", default=None,
                       help="record wall-clock times (rows are then not byte-reproducible)")
        p.add_argument("--json", dest="json_summary", action="store_true", default=None)
        if name == "snr-sweep":
            p.add_argument("--snr-grid", type=_float_list, help="comma-separated SNR points in dB")
        if name == "irs-sweep":
            p.add_argument("--l-grid", type=_int_list, help="comma-separated IRS counts")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    experiment = SUBCOMMANDS[args.command]
    data = read_config_file(args.config) if args.config else {}
    if data.get("experiment", experiment) != experiment:
        raise ConfigError("experiment", f"config file is for {data['experiment']!r}, not {experiment!r}")
    data = merge_overrides(
        data, experiment=experiment, seed=args.seed, trials=args.trials, epsilon=args.epsilon,
        max_iter=args.max_iter, noise_mode=args.noise_mode, dual_method=args.dual_method,
        output=args.out, snr_db=args.snr_db, snr_reference=args.snr_reference,
        schemes=args.schemes, workers=args.workers, timing=args.timing,
        json_summary=args.json_summary, snr_grid_db=getattr(args, "snr_grid", None),
        l_grid=getattr(args, "l_grid", None),
    )
    base = Path(args.config).parent if args.config else Path(".")
    return config_from_dict(data, base)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        result = run_experiment(config)
    except Exception as exc:  # noqa: BLE001 - any failure inside a run maps to exit code 2
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for path in result["paths"]:
        print(path)
    if config.experiment == "validate":
        for check in result["rows"]:
            print(check.line())
        return 0 if result["passed"] else 3
    return 0
