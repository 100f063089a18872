"""Command line interface: run, suite, plot, validate."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness


def _cmd_run(args) -> int:
    run, checks = harness.run_one(args.file, args.horizon, args.out)
    doc = dict(run.summary)
    doc["expectations"] = checks
    print(json.dumps(doc, sort_keys=True, indent=2))
    return 0 if all(c["ok"] for c in checks) else 1


def _cmd_suite(args) -> int:
    report = harness.run_suite(
        filter_str=args.filter or "",
        horizon_override=args.horizon,
        out_dir=args.out,
        jobs=args.jobs,
    )
    width = max((len(r["scenario"]) for r in report["rows"]), default=10)
    for r in report["rows"]:
        status = "pass" if r["passed"] else "FAIL"
        print(f"{r['scenario']:<{width}}  {status}  {r['claim']}")
        if not r["passed"]:
            for c in r["checks"]:
                if not c["ok"]:
                    print(f"    failed: {c['expect']} (actual {c['actual']})")
    print(f"{report['count']} scenarios, {'all passed' if report['passed'] else 'FAILURES'}")
    if args.report:
        Path(args.report).write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return 0 if report["passed"] else 1


def _cmd_plot(args) -> int:
    header = None
    with open(args.trace) as fh:
        header = json.loads(fh.readline())
    if header.get("schema") != harness.TRACE_SCHEMA:
        print(f"not a limitgen trace: {args.trace}", file=sys.stderr)
        return 2
    sc = harness.parse_scenario_text(header["config"], header["scenario"])
    run = harness.run_scenario(sc)
    csv = harness.emit_plot_csv(run, args.kind, args.index)
    if args.out:
        Path(args.out).write_text(csv)
    else:
        sys.stdout.write(csv)
    return 0


def _cmd_validate(args) -> int:
    try:
        sc = harness.load_scenario(args.file)
        harness.build_collections(sc)
        if sc.kind in ("game", "adaptive", "dedupe"):
            base = harness.build_collections(sc)[1]
            harness.build_stream(sc, base, base.language_at(sc.target))
    except (harness.ConfigError, ValueError, IndexError) as exc:
        print(f"{args.file}: {exc}", file=sys.stderr)
        return 1
    print(f"{args.file}: ok ({sc.name}, kind={sc.kind}, horizon={sc.horizon})")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="limitgen",
        description="deterministic simulation of language generation in the "
        "limit under contaminated enumerations",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="run one scenario file")
    p_run.add_argument("file")
    p_run.add_argument("--horizon", type=int, default=None)
    p_run.add_argument("--out", default=None, help="directory for trace/summary files")
    p_run.set_defaults(fn=_cmd_run)

    p_suite = sub.add_parser("suite", help="run the bundled scenario suite")
    p_suite.add_argument("--filter", default="")
    p_suite.add_argument("--horizon", type=int, default=None)
    p_suite.add_argument("--out", default=None)
    p_suite.add_argument("--jobs", type=int, default=1)
    p_suite.add_argument("--report", default=None, help="write the report JSON here")
    p_suite.set_defaults(fn=_cmd_suite)

    p_plot = sub.add_parser("plot", help="emit CSV plot data from a trace file")
    p_plot.add_argument("trace")
    p_plot.add_argument("--kind", required=True,
                        choices=["noise_rate", "set_density", "element_density", "priority"])
    p_plot.add_argument("--index", type=int, default=None)
    p_plot.add_argument("--out", default=None)
    p_plot.set_defaults(fn=_cmd_plot)

    p_val = sub.add_parser("validate", help="check a scenario file")
    p_val.add_argument("file")
    p_val.set_defaults(fn=_cmd_validate)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
