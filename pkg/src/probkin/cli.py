import argparse
import logging
import os
import sys
from dataclasses import replace
from typing import List, Optional

from probkin.config import load_config, load_stream
from probkin.demos import DEMOS, demo
from probkin.errors import ConfigError, ProbKinError
from probkin.report import RunReport, run_dipk, run_dpk

log = logging.getLogger(__name__)


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    ap = argparse.ArgumentParser(
        prog="probkin", description="Replay observation streams through DPK/DIPK updates"
    )
    ap.add_argument("-v", "--verbose", action="store_true", help="Log every update step")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("run-dpk", "Update a single prior along the stream"),
        ("run-dipk", "Update every generator of a credal set along the stream"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="Session config (JSON)")
        p.add_argument(
            "--stream",
            default=None,
            help="Observation stream, one batch per line (default: no observations)",
        )
        p.add_argument("--out", default="reports/run.json", help="Report JSON path")
        p.add_argument("--csv", default=None, help="Optional per-step CSV table")
        p.add_argument(
            "--tolerance", type=float, default=None, help="Override the config stop tolerance"
        )
        p.add_argument("--seed", type=int, default=0, help="Seed for sampled event checks")
        if name == "run-dipk":
            p.add_argument(
                "--sweep-events",
                action="store_true",
                help="Classify every event at every step (at most 12 atoms)",
            )

    p = sub.add_parser("demo", help="Run a built-in example")
    p.add_argument("name", choices=sorted(DEMOS))
    p.add_argument("--out", default=None, help="Report JSON path (default: reports/<name>.json)")
    p.add_argument("--csv", default=None, help="Optional per-step CSV table")
    p.add_argument("--seed", type=int, default=0, help="Seed recorded in the report")
    return ap.parse_args(argv)


def _run(args: argparse.Namespace) -> RunReport:
    if args.command == "demo":
        return demo(args.name, seed=args.seed)
    config = load_config(args.config)
    if args.tolerance is not None:
        config = replace(config, tolerance=args.tolerance)
    stream = load_stream(args.stream, config.model()) if args.stream else []
    if args.command == "run-dpk":
        return run_dpk(config, stream, seed=args.seed)
    return run_dipk(config, stream, sweep=args.sweep_events, seed=args.seed)


def _write(report: RunReport, out: str, csv: Optional[str]) -> None:
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    with open(out, "w", encoding="utf-8") as f:
        f.write(report.to_json())
    print(f"Wrote: {out}")
    if csv:
        os.makedirs(os.path.dirname(csv) or ".", exist_ok=True)
        report.to_frame().write_csv(csv)
        print(f"Wrote: {csv}")


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        report = _run(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except ProbKinError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    out = args.out or os.path.join("reports", f"{args.name}.json")
    try:
        _write(report, out, args.csv)
    except OSError as e:
        print(f"error: cannot write report: {e}", file=sys.stderr)
        return 2
    log.debug("%s finished: %s", args.command, report.stop_reason)
    return 0


if __name__ == "__main__":
    sys.exit(main())
