"""Command-line interface.

Four subcommands tie the library together for experiments:

* ``simulate`` -- run one workload against one fusion setup; writes the
  trace (JSONL) and a metrics summary.
* ``optimize`` -- run the feedback loop from the singleton setup until the
  heuristic converges; writes the optimization report and per-setup ECDF
  CSVs, prints the setup progression table.
* ``graph`` -- infer the task call graph from trace files and write DOT.
* ``report`` -- pretty-print (or CSV-dump) a saved optimization report.

Exit codes are stable for scripting: 0 success, 1 I/O error, 2 validation
error. All commands are deterministic under a fixed ``--seed``; the
``FUSIONSIM_OUT`` environment variable overrides ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import trace as trace_mod
from .callgraph import infer_graph, to_dot
from .controller import Csp1Config, FeedbackLoop, OptimizationReport
from .errors import FusionSimError
from .model import parse_setup
from .optimizer import Objective
from .sampling import duration_from_config
from .simkernel import PlatformConfig, run_simulation
from .trace import ecdf_export, summarize
from .workloads import (
    ApplicationSpec,
    ColdStorm,
    SteadyRate,
    Workload,
    builtin_app,
    load_app_spec,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2


def _parse_workload(text: str) -> SteadyRate | ColdStorm:
    try:
        kind, _, rest = text.partition(":")
        if kind == "steady":
            rate, count = rest.split(",")
            return SteadyRate(rate_rps=float(rate), total_requests=int(count))
        if kind == "coldstorm":
            return ColdStorm(total_requests=int(rest))
    except (ValueError, FusionSimError) as exc:
        raise argparse.ArgumentTypeError(f"bad workload {text!r}: {exc}") from exc
    raise argparse.ArgumentTypeError(
        f"unknown workload {text!r} (expected steady:RATE,N or coldstorm:N)"
    )


def _parse_objective(text: str) -> Objective:
    try:
        return Objective.parse(text)
    except (ValueError, FusionSimError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _parse_csp1(text: str) -> Csp1Config:
    try:
        i, f, delta, window = text.split(",")
        return Csp1Config(
            clearance_i=int(i),
            sampling_fraction_f=float(f),
            degradation_delta=float(delta),
            window_invocations=int(window),
        )
    except (ValueError, FusionSimError) as exc:
        raise argparse.ArgumentTypeError(
            f"bad --csp1 {text!r} (expected I,F,DELTA,WINDOW): {exc}"
        ) from exc


def _load_app(value: str) -> ApplicationSpec:
    if value in ("tree", "iot"):
        return builtin_app(value)
    return load_app_spec(value)


def _load_platform(path: str | None) -> PlatformConfig:
    if path is None:
        return PlatformConfig()
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    if "cold_start_ms" in data:
        data["cold_start_ms"] = duration_from_config(data["cold_start_ms"])
    known = set(PlatformConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise FusionSimError(f"unknown platform config key(s): {', '.join(sorted(unknown))}")
    return PlatformConfig(**data)


def _out_dir(args) -> Path:
    out = os.environ.get("FUSIONSIM_OUT") or args.out
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, payload: dict) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _print_table(rows: list[dict], columns: list[str]) -> None:
    widths = {c: max(len(c), *(len(str(r[c])) for r in rows)) for c in columns}
    header = "  ".join(c.ljust(widths[c]) for c in columns)
    print(header)
    print("-" * len(header))
    for row in rows:
        print("  ".join(str(row[c]).ljust(widths[c]) for c in columns))


def _metric_rows(report: OptimizationReport) -> list[dict]:
    rows = []
    for i, entry in enumerate(report.entries):
        m = entry.metrics
        rows.append(
            {
                "order": i,
                "setup": entry.setup,
                "action": entry.action,
                "rr_med": f"{m.rr_med:.1f}",
                "rr_avg": f"{m.rr_avg:.1f}",
                "billed_avg": f"{m.billed_avg:.1f}",
                "cost_avg": f"{m.cost_avg:.8f}",
                "cold_starts": m.cold_start_count,
            }
        )
    return rows


# -- subcommands --------------------------------------------------------------

def cmd_simulate(args) -> int:
    app = _load_app(args.app)
    setup = parse_setup(args.setup)
    platform = _load_platform(args.platform)
    workload = Workload(kind=args.workload, seed=args.seed)
    log = run_simulation(app, setup, workload, platform)
    metrics = summarize(log, platform)
    out = _out_dir(args)
    trace_mod.save(log, out / "trace.jsonl")
    if args.format == "json":
        _write_json(out / "metrics.json", metrics.to_dict())
    else:
        data = metrics.to_dict()
        with (out / "metrics.csv").open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(data.keys())
            writer.writerow(data.values())
    print(
        f"simulated {metrics.n_invocations} invocations of {app.name!r} under {setup.key}: "
        f"rr_med={metrics.rr_med:.1f} ms, billed_avg={metrics.billed_avg:.1f} ms "
        f"-> {out}"
    )
    return EXIT_OK


def cmd_optimize(args) -> int:
    app = _load_app(args.app)
    platform = _load_platform(args.platform)
    loop = FeedbackLoop(
        app,
        platform,
        Workload(kind=args.workload, seed=args.seed),
        args.objective,
        csp1=args.csp1,
        seed=args.seed,
        progress=sys.stderr,
    )
    report = loop.run()
    out = _out_dir(args)
    _write_json(out / "report.json", report.to_dict())
    for i, entry in enumerate(report.entries):
        logs = loop.logs_for(entry.setup)
        ecdf_export(logs, "rr", out / f"ecdf_rr_{i:02d}.csv")
        ecdf_export(logs, "billed", out / f"ecdf_billed_{i:02d}.csv")
    _print_table(
        _metric_rows(report),
        ["order", "setup", "action", "rr_med", "rr_avg", "billed_avg", "cost_avg", "cold_starts"],
    )
    print(f"converged: {report.final}  ({report.windows} windows) -> {out}")
    return EXIT_OK


def cmd_graph(args) -> int:
    logs = [trace_mod.load(path) for path in args.traces]
    graph = infer_graph(logs)
    dot = to_dot(graph)
    Path(args.dot).write_text(dot, encoding="utf-8")
    print(f"wrote {args.dot}: {len(graph.nodes)} tasks, {len(graph.edges)} edges")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        with open(args.report, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FusionSimError(f"{args.report}: not a valid report: {exc}") from exc
    try:
        report = OptimizationReport.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise FusionSimError(f"{args.report}: not an optimization report ({exc!r})") from exc
    rows = _metric_rows(report)
    columns = ["order", "setup", "action", "rr_med", "rr_avg", "billed_avg", "cost_avg", "cold_starts"]
    if args.format == "csv":
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(row[c] for c in columns)
    else:
        _print_table(rows, columns)
        print(f"final: {report.final} (converged={report.converged})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fusionsim",
        description="Simulate FaaS fusion setups and optimize them from traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=42, help="RNG seed (default 42)")
        p.add_argument("--out", default="out", help="output directory (env FUSIONSIM_OUT overrides)")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p_sim = sub.add_parser("simulate", help="run one workload against one fusion setup")
    p_sim.add_argument("--app", required=True, help="builtin name (tree, iot) or app-spec TOML path")
    p_sim.add_argument("--setup", required=True, help='fusion setup, e.g. "(A,B)-(C)"')
    p_sim.add_argument("--workload", required=True, type=_parse_workload,
                       help="steady:RATE,N or coldstorm:N")
    p_sim.add_argument("--platform", default=None, help="platform config TOML path")
    add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_opt = sub.add_parser("optimize", help="run the feedback loop to convergence")
    p_opt.add_argument("--app", required=True)
    p_opt.add_argument("--objective", default=Objective("median_rr"), type=_parse_objective,
                       help="median_rr | avg_rr | p99_rr | avg_billed | weighted:WL,WC")
    p_opt.add_argument("--workload", required=True, type=_parse_workload)
    p_opt.add_argument("--csp1", default=Csp1Config(), type=_parse_csp1,
                       help="I,F,DELTA,WINDOW (default 5,0.2,0.1,100)")
    p_opt.add_argument("--platform", default=None)
    add_common(p_opt)
    p_opt.set_defaults(func=cmd_optimize)

    p_graph = sub.add_parser("graph", help="infer the call graph from traces")
    p_graph.add_argument("--traces", nargs="+", required=True, help="trace JSONL files")
    p_graph.add_argument("--dot", required=True, help="output DOT path")
    add_common(p_graph)
    p_graph.set_defaults(func=cmd_graph)

    p_rep = sub.add_parser("report", help="print an optimization report")
    p_rep.add_argument("--report", required=True, help="report.json path")
    add_common(p_rep)
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FusionSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
