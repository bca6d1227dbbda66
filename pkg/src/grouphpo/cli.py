"""Command line entry point: ``grouphpo {run,compare,timing,spaces}``.

Any long flag may also come from a YAML file given with ``--config``
(keys use the flag name with dashes or underscores); flags on the command
line win.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import yaml

from . import harness
from .search_space import load_space, paper_search_space

logger = logging.getLogger("grouphpo")

DEFAULTS: dict[str, dict[str, Any]] = {
    "run": {
        "strategy": harness.SIMULTANEOUS,
        "objective": "surrogate_cnn",
        "rounds": 5,
        "iters": 100,
        "seed": 0,
        "out": "results",
    },
    "compare": {"objective": "surrogate_cnn", "rounds": 5, "iters": 100, "seed": 0, "out": "results"},
    "timing": {"dims": "1-12", "iters": 100, "delay": 0.01, "seed": 0, "out": "results"},
    "spaces": {"space_file": None},
}


def parse_dims(text: str | int | Sequence[int]) -> list[int]:
    """``"1-12"``, ``"1,2,5"`` or a list of ints."""
    if isinstance(text, int):
        return [text]
    if not isinstance(text, str):
        return [int(v) for v in text]
    dims: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-", 1)
            dims.extend(range(int(a), int(b) + 1))
        elif part:
            dims.append(int(part))
    if not dims or any(d < 1 for d in dims):
        raise ValueError(f"invalid --dims {text!r}")
    return dims


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grouphpo", description="Grouped sequential vs simultaneous TPE experiments."
    )
    parser.add_argument("--config", help="YAML file supplying default flag values")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one strategy for several rounds")
    run.add_argument("--strategy", choices=harness.STRATEGIES)
    run.add_argument("--objective", choices=sorted(harness.OBJECTIVES))
    run.add_argument("--rounds", type=int)
    run.add_argument("--iters", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory")

    cmp_ = sub.add_parser("compare", help="run both strategies and summarize")
    cmp_.add_argument("--objective", choices=sorted(harness.OBJECTIVES))
    cmp_.add_argument("--rounds", type=int)
    cmp_.add_argument("--iters", type=int)
    cmp_.add_argument("--seed", type=int)
    cmp_.add_argument("--out", help="output directory")

    timing = sub.add_parser("timing", help="optimizer overhead vs number of parameters")
    timing.add_argument("--dims", help="e.g. 1-12 or 1,4,8")
    timing.add_argument("--iters", type=int)
    timing.add_argument("--delay", type=float)
    timing.add_argument("--seed", type=int)
    timing.add_argument("--out", help="output directory")

    spaces = sub.add_parser("spaces", help="print the canonical CNN search space")
    spaces.add_argument("--space-file", help="print this space file instead")
    return parser


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Merge defaults < config file < command-line flags."""
    options = dict(DEFAULTS[args.command])
    if args.config:
        data = yaml.safe_load(Path(args.config).read_text()) or {}
        if not isinstance(data, dict):
            raise ValueError(f"{args.config}: expected a mapping")
        section = data.get(args.command, {})
        for source in (data, section if isinstance(section, dict) else {}):
            for key, value in source.items():
                key = key.replace("-", "_")
                if key in options:
                    options[key] = value
    for key in options:
        value = getattr(args, key, None)
        if value is not None:
            options[key] = value
    return options


def _print_space(space) -> None:
    print(f"{'name':<16} {'kind':<15} {'domain':<24} default")
    for p in space:
        domain = "{" + ", ".join(map(str, p.choices)) + "}" if p.choices else f"[{p.low:g}, {p.high:g}]"
        print(f"{p.name:<16} {p.kind:<15} {domain:<24} {p.default}")


def cmd_run(opts: dict) -> None:
    records = harness.run_experiment(
        opts["strategy"], opts["objective"], int(opts["rounds"]), int(opts["iters"]), int(opts["seed"])
    )
    out = Path(opts["out"])
    harness.export_csv(records, out / f"iterations_{opts['strategy']}.csv")
    harness.export_json(records, out / f"runs_{opts['strategy']}.json")
    for rec in records:
        print(
            f"round {rec.round} seed {rec.seed}: best {rec.best.value:.6g} "
            f"time_to_best {rec.time_to_best_seconds:.1f}s total {rec.total_time_seconds:.1f}s"
        )
    print(f"wrote {out}")


def cmd_compare(opts: dict) -> None:
    grouped, simultaneous, summary = harness.compare(
        opts["objective"], int(opts["rounds"]), int(opts["iters"]), int(opts["seed"])
    )
    out = Path(opts["out"])
    records = grouped + simultaneous
    harness.export_csv(records, out / "iterations.csv")
    harness.export_csv(summary, out / "summary.csv")
    harness.export_json(summary, out / "summary.json")
    harness.write_csv(out / "scatter.csv", *harness.scatter_rows(records))
    for name, avg in (("grouped_sequential", summary.grouped), ("simultaneous", summary.simultaneous)):
        print(
            f"{name:<20} time_to_best {avg.time_to_best_seconds:10.1f}s "
            f"total {avg.total_time_seconds:10.1f}s best {avg.best_value:.6g}"
        )
    print(
        f"time reduction {summary.time_reduction_percent:.3f}%  "
        f"time-to-best reduction {summary.time_to_best_reduction_percent:.3f}%  "
        f"value change {summary.value_change:+.6g}"
    )
    print(f"wrote {out}")


def cmd_timing(opts: dict) -> None:
    rows = harness.timing_study(
        parse_dims(opts["dims"]), int(opts["iters"]), float(opts["delay"]), int(opts["seed"])
    )
    path = harness.export_csv(rows, Path(opts["out"]) / "timing.csv")
    print(f"{'d':>3}  t_tpe (s)")
    for row in rows:
        print(f"{row.d:>3}  {row.t_tpe_seconds:.3f}")
    print(f"wrote {path}")


def cmd_spaces(opts: dict) -> None:
    _print_space(load_space(opts["space_file"]) if opts["space_file"] else paper_search_space())


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "timing": cmd_timing, "spaces": cmd_spaces}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        COMMANDS[args.command](resolve(args))
    except Exception as exc:  # report every failure as a diagnostic + nonzero exit
        print(f"grouphpo {args.command}: error: {exc}", file=sys.stderr)
        if args.verbose:
            logger.exception("details")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
