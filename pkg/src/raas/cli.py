"""Command-line front end.

Exit codes: 0 success, 2 usage or validation error, 3 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench
from .coupling import fixed_point, iteration_log_csv
from .model import ScenarioError, dump_scenario, load_scenario
from .synth import synth_corridor

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    pass


def _floats(text: str) -> tuple:
    try:
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"cannot parse values {text!r}") from None
    if not vals:
        raise UsageError("no values given")
    return vals


def _strategies(text: str) -> tuple:
    names = tuple(x.strip() for x in text.split(",") if x.strip())
    if not names:
        raise UsageError("empty strategy list")
    for n in names:
        if n not in bench.STRATEGIES:
            raise UsageError(f"unknown strategy {n!r}; choose from {', '.join(bench.STRATEGIES)}")
    return names


def cmd_validate(args) -> int:
    model = load_scenario(args.file)
    print(f"ok: {len(model.stations)} stations, {len(model.links)} links, "
          f"{len(model.lines)} lines, {len(model.vehicles)} vehicles")
    return EXIT_OK


def cmd_synth(args) -> int:
    model = synth_corridor(args.seed)
    dump_scenario(model, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    names = _strategies(args.strategy)
    model = load_scenario(args.scenario)
    ctx = bench.Context(model) if any(n != "Normal" for n in names) else None
    rows = [bench.run_strategy(model, n, args.seed, args.out, args.trace, ctx) for n in names]
    md, csv_text = bench.report(rows)
    if args.out:
        out = Path(args.out)
        bench._atomic_write(out / "table.md", md)
        bench._atomic_write(out / "table.csv", csv_text)
    print(md, end="")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = bench.SweepSpec(args.param, _floats(args.values),
                           _strategies(args.strategies) if args.strategies else bench.STRATEGIES[1:],
                           args.volume)
    rows = bench.sweep(args.scenario, spec, args.seed, args.out, args.workers)
    print(bench.rows_csv(rows), end="")
    return EXIT_OK


def cmd_couple(args) -> int:
    model = load_scenario(args.scenario)
    plan, report, records = fixed_point(model, tol=args.tol, max_iter=args.max_iter, seed=args.seed)
    log = iteration_log_csv(records)
    if args.out:
        out = Path(args.out)
        bench._atomic_write(out / "iterations.csv", log)
        bench._atomic_write(out / "plan.json", plan.to_json())
        report.write(out, prefix="final_")
    print(log, end="")
    last = records[-1]
    print(json.dumps({"converged": last.converged, "iterations": len(records),
                      "gap": last.gap, "objective": plan.objective}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="raas", description="Rail disruption bridging toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check a scenario file")
    s.add_argument("file")
    s.set_defaults(fn=cmd_validate)

    s = sub.add_parser("synth", help="write a synthetic corridor scenario")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("run", help="plan and simulate strategies")
    s.add_argument("--scenario", required=True)
    s.add_argument("--strategy", required=True, help="comma-separated: " + ",".join(bench.STRATEGIES))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--trace", action="store_true", help="also write the NDJSON event trace")
    s.set_defaults(fn=cmd_run)

    s = sub.add_parser("sweep", help="optimiser-only sensitivity sweep")
    s.add_argument("--scenario", required=True)
    s.add_argument("--param", required=True, choices=bench.SWEEP_PARAMS)
    s.add_argument("--values", required=True)
    s.add_argument("--strategies")
    s.add_argument("--volume", type=float, help="fixed blocked volume for alpha/ca_rate sweeps")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_sweep)

    s = sub.add_parser("couple", help="optimiser-simulator fixed point")
    s.add_argument("--scenario", required=True)
    s.add_argument("--tol", type=float, default=0.05)
    s.add_argument("--max-iter", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_couple)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ScenarioError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        logging.getLogger("raas").exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
