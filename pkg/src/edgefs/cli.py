"""Command line entry point.

    edgefs run FILE [--seed N] [--loss P] [--delay MIN..MAX] [--trace PATH] [--report PATH]
    edgefs generate SEED [--nodes N] [--events N]

``run`` exits 0 when every checkpoint and the final check converged, 1 when
any diverged or an invariant broke, and 2 on unreadable input.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .simnet import NetConfig
from .scenario import ScenarioFailure, ScenarioParseError, parse_scenario, random_scenario, run


def _delay(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("..")
    try:
        low = int(lo)
        high = int(hi) if sep else low
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected MIN..MAX, got {text!r}") from None
    if not 0 <= low <= high:
        raise argparse.ArgumentTypeError("need 0 <= MIN <= MAX")
    return low, high


def _loss(text: str) -> float:
    value = float(text)
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError("loss must be in [0, 1)")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgefs", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="play a scenario file and check convergence")
    p_run.add_argument("file", type=Path)
    p_run.add_argument("--seed", type=int, help="network seed (overrides 'config seed')")
    p_run.add_argument("--loss", type=_loss, default=0.0, help="datagram loss probability")
    p_run.add_argument("--delay", type=_delay, default=(1, 3), metavar="MIN..MAX",
                       help="per-message delay range in ticks (default 1..3)")
    p_run.add_argument("--trace", type=Path, help="write the event trace here")
    p_run.add_argument("--report", type=Path, help="write the consistency report here")
    p_run.add_argument("--views", action="store_true",
                       help="add a view line to the trace whenever a node's listing changes")
    p_run.add_argument("--check-invariants", action="store_true",
                       help="verify node invariants after every event")

    p_gen = sub.add_parser("generate", help="print a random scenario")
    p_gen.add_argument("seed", type=int)
    p_gen.add_argument("--nodes", type=int, default=10)
    p_gen.add_argument("--events", type=int, default=100)
    return parser


def _run(args: argparse.Namespace) -> int:
    try:
        scenario = parse_scenario(args.file.read_text())
    except OSError as exc:
        print(f"edgefs: {exc}", file=sys.stderr)
        return 2
    except ScenarioParseError as exc:
        print(f"edgefs: {args.file}: {exc}", file=sys.stderr)
        return 2
    seed = args.seed if args.seed is not None else (scenario.seed or 0)
    net = NetConfig(seed=seed, delay_min=args.delay[0], delay_max=args.delay[1],
                    loss_probability=args.loss)
    tracing = args.trace is not None
    try:
        result = run(scenario, net, trace=tracing, trace_views=tracing and args.views,
                     check_invariants=args.check_invariants)
    except ScenarioFailure as exc:
        print(f"edgefs: invariant violated: {exc}", file=sys.stderr)
        return 1
    if args.trace is not None:
        args.trace.write_text(result.trace_text())
    report = result.report_text()
    if args.report is not None:
        args.report.write_text(report)
    else:
        sys.stdout.write(report)
    return 0 if result.passed else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return _run(args)
    sys.stdout.write(random_scenario(args.seed, args.nodes, args.events).text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
