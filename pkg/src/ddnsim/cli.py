"""Command-line entry point.

Exit codes: 0 success, 2 config/usage error, 3 trace error, 4 device
allocation failure.
"""

import sys
import argparse

from .config import ConfigError, RunConfig, format_config, load_config
from .controller import parse_policy
from .device import DeviceError
from .host import TraceError, parse_trace
from .runner import run, synthetic_trace

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRACE = 3
EXIT_DEVICE = 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ddnsim",
        description=(
            "Deterministic trace-driven simulator of secure-deletion policies "
            "on hybrid DRAM+NVM memory."
        ),
    )
    p.add_argument("--config", metavar="PATH", help="flat key = value config file")
    p.add_argument("--trace", metavar="PATH", help="trace file to replay")
    p.add_argument(
        "--policy",
        metavar="NAME[,NAME...]",
        help="policies to run (MarkOnly, EraseBased, DdnRandom, DdnNonRandom[(fill)])",
    )
    p.add_argument("--seed", type=int, help="deterministic RNG seed (required to run)")
    p.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    p.add_argument("--format", dest="out_format", choices=("csv", "jsonl"))
    p.add_argument(
        "--synthetic",
        type=int,
        metavar="N",
        help="generate a synthetic workload of N write/flush/update lines",
    )
    p.add_argument(
        "--update-ratio",
        type=float,
        default=None,
        help="fraction of synthetic writes that get updated (default 1.0)",
    )
    p.add_argument(
        "--print-config",
        action="store_true",
        help="print the effective configuration and exit",
    )
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.policy:
            cfg.policies = tuple(
                parse_policy(part) for part in args.policy.split(",") if part.strip()
            )
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out_format:
            cfg.out_format = args.out_format
    except (ConfigError, ValueError) as exc:
        print(f"ddnsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.print_config:
        sys.stdout.write(format_config(cfg))
        return EXIT_OK

    if (args.trace is None) == (args.synthetic is None):
        print("ddnsim: exactly one of --trace or --synthetic is required", file=sys.stderr)
        return EXIT_CONFIG

    try:
        cfg.validate()
    except ConfigError as exc:
        print(f"ddnsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.trace is not None:
            try:
                with open(args.trace, encoding="utf-8") as f:
                    text = f.read()
            except OSError as exc:
                raise TraceError(f"cannot read trace {args.trace}: {exc}") from exc
        else:
            ratio = 1.0 if args.update_ratio is None else args.update_ratio
            try:
                text = synthetic_trace(
                    args.synthetic, ratio, cfg.seed,
                    cfg.cells_per_cache_slot, cfg.bits_per_cell,
                )
            except ValueError as exc:
                print(f"ddnsim: config error: {exc}", file=sys.stderr)
                return EXIT_CONFIG
        events = parse_trace(text, cfg.cells_per_cache_slot, cfg.bits_per_cell)
        report = run(cfg, events)
    except TraceError as exc:
        print(f"ddnsim: trace error: {exc}", file=sys.stderr)
        return EXIT_TRACE
    except DeviceError as exc:
        print(f"ddnsim: device error: {exc}", file=sys.stderr)
        return EXIT_DEVICE

    payload = report.csv_text if cfg.out_format == "csv" else report.jsonl_text
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as f:
                f.write(payload)
        except OSError as exc:
            print(f"ddnsim: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        sys.stdout.write(payload)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
