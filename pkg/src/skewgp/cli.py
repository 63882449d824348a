"""Command-line harness: ``skewgp <task> --config cfg.json --seed N --out PATH``.

Flags override config-file fields; ``--set key=value`` (repeatable,
JSON-parsed values) overrides anything else.  Exit codes: 0 success,
2 input error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .bench import (
    RUNNERS,
    ExperimentConfig,
    generate_synthetic,
    run_fit,
    write_rows,
)
from .errors import InputError, NumericError
from .likelihoods import save_dataset

_TASKS = (
    "fit",
    "predict",
    "active_learn",
    "pbo",
    "mixed_bo",
    "safe_bo",
    "sample_bench",
    "generate",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skewgp", description="skew-process benchmark harness"
    )
    parser.add_argument("task", choices=_TASKS)
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="overrides config seed")
    parser.add_argument("--out", help="output path (CSV, model or dataset JSON)")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config field (VALUE parsed as JSON when possible)",
    )
    return parser


def _resolve_config(args) -> ExperimentConfig:
    raw: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except FileNotFoundError as exc:
            raise InputError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"config is not valid JSON: {exc}") from exc
    raw["task"] = args.task
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out is not None:
        raw["output_path"] = args.out
    for item in args.overrides:
        if "=" not in item:
            raise InputError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        try:
            raw[key] = json.loads(value)
        except json.JSONDecodeError:
            raw[key] = value
    return ExperimentConfig.from_dict(raw)


def run(config: ExperimentConfig) -> int:
    out = config.output_path
    if config.task == "generate":
        if not out:
            raise InputError("generate needs --out")
        data = generate_synthetic(config.kind, {"n": config.n}, config.seed)
        save_dataset(data, out)
        print(f"wrote dataset {out}")
        return 0
    if config.task == "fit":
        if not out:
            raise InputError("fit needs --out")
        model = run_fit(config)
        model.save(out)
        print(f"wrote model {out} (log marginal {model.log_marginal:.6g})")
        return 0
    runner = RUNNERS[config.task]
    rows = runner(config)
    if not out:
        raise InputError(f"{config.task} needs --out")
    write_rows(out, rows, config)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(_resolve_config(args))
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
