"""Command-line front end.

Subcommands: ``search``, ``sweep``, ``simulate``, ``baseline``,
``standalone``, ``validate``, ``plot`` and the ``synthesize`` test helper.
Every run with file outputs also writes a run report carrying content digests
of its inputs so identical runs are recognizably identical.

Exit codes: 0 success, 2 invalid input, 3 search failure, 4 internal
consistency failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import runtime, search
from .errors import (
    CandidateOutOfRange,
    DyceError,
    EmptyGrid,
    Infeasible,
    InvalidLambda,
    InvalidShape,
    InvariantViolation,
    MissingFile,
    PositionOutOfRange,
    SampleOutOfRange,
    SchemaViolation,
    ShapeMismatch,
)
from .metrics import evaluate
from .trace import (
    dumps_canonical,
    format_number,
    load_trace,
    synthesize_trace,
    write_trace,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SEARCH = 3
EXIT_INTERNAL = 4

_INPUT_ERRORS = (
    MissingFile,
    SchemaViolation,
    InvariantViolation,
    InvalidShape,
    ShapeMismatch,
    InvalidLambda,
    SampleOutOfRange,
    EmptyGrid,
)
_SEARCH_ERRORS = (PositionOutOfRange, CandidateOutOfRange, Infeasible)


class InternalCheckFailed(DyceError):
    """Simulation and set-formula metrics disagreed; never expected."""


@dataclass
class RunReport:
    """Provenance for one CLI invocation: what ran, on which input bytes,
    with which settings, producing which files."""

    command: str
    inputs: dict
    settings: dict
    outputs: list
    wall_time_s: float
    created_utc: str

    def write(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            dumps_canonical(
                {
                    "command": self.command,
                    "inputs": self.inputs,
                    "settings": self.settings,
                    "outputs": self.outputs,
                    "wall_time_s": self.wall_time_s,
                    "created_utc": self.created_utc,
                }
            )
        )


def _sha256(path: Path) -> str:
    return "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()


def _trace_digests(trace_arg: str) -> dict:
    base = Path(trace_arg)
    manifest = base / "manifest.json" if base.is_dir() else base
    digests = {str(manifest): _sha256(manifest)}
    data = json.loads(manifest.read_text())
    trace_path = manifest.parent / data["trace"]
    digests[str(trace_path)] = _sha256(trace_path)
    return digests


def _make_report(command, inputs, settings, outputs, started) -> RunReport:
    return RunReport(
        command=command,
        inputs=inputs,
        settings=settings,
        outputs=[str(p) for p in outputs],
        wall_time_s=time.perf_counter() - started,
        created_utc=datetime.now(timezone.utc).isoformat(),
    )


def _settings_from_args(args) -> search.SearchSettings:
    algorithm = {"single-pass": "single_pass", "iterative": "iterative"}[args.algo]
    method = {"exact": "exact_scan", "golden": "golden_section"}[args.threshold]
    return search.SearchSettings(
        algorithm=algorithm,
        threshold_method=method,
        golden_tolerance=args.golden_tol,
    )


def _check_lambda_arg(lam: float) -> None:
    if not 0.0 <= lam <= 1.0:
        raise InvalidLambda(f"lambda out of range [0, 1]: {lam!r}")


def _print_report(report) -> None:
    print(json.dumps(report.to_json_dict(), sort_keys=True))


def _write_frontier_csv(path: Path, entries, config_paths) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "A", "C", "f", "config_path"])
        for entry, config_path in zip(entries, config_paths):
            m = entry.metrics
            writer.writerow(
                [
                    format_number(entry.lam),
                    format_number(m.relative_accuracy),
                    format_number(m.relative_complexity),
                    format_number(m.objective),
                    config_path,
                ]
            )


def cmd_search(args) -> int:
    started = time.perf_counter()
    _check_lambda_arg(args.lam)
    trace, costs = load_trace(args.trace)
    settings = _settings_from_args(args)
    config, report = search.run_search(trace, costs, args.lam, settings)
    entry = search.FrontierEntry(lam=args.lam, config=config, metrics=report)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dumps_canonical(entry.to_json_dict()))
    print(f"k = {list(config.k)}")
    print(f"t = {list(config.t)}")
    print(
        f"A = {format_number(report.relative_accuracy)}  "
        f"C = {format_number(report.relative_complexity)}  "
        f"f = {format_number(report.objective)}"
    )
    _make_report(
        "search",
        _trace_digests(args.trace),
        {
            "lambda": args.lam,
            "algo": args.algo,
            "threshold": args.threshold,
            "golden_tol": args.golden_tol,
        },
        [out],
        started,
    ).write(out.with_suffix(".run.json"))
    return EXIT_OK


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    trace, costs = load_trace(args.trace)
    grid = search.make_lambda_grid(args.start, args.end, args.step)
    settings = _settings_from_args(args)
    entries, pareto = search.sweep_lambda(
        trace, costs, grid, settings, threads=args.threads
    )
    out = Path(args.out)
    store_dir = out / "store"
    store = runtime.ConfigStore(entries=list(entries))
    store_paths = store.save(store_dir)
    config_paths = [str(p.relative_to(out)) for p in store_paths]
    _write_frontier_csv(out / "frontier.csv", entries, config_paths)
    by_lam = {entry.lam: path for entry, path in zip(entries, config_paths)}
    _write_frontier_csv(
        out / "frontier_pareto.csv", pareto, [by_lam[e.lam] for e in pareto]
    )
    outputs = [out / "frontier.csv", out / "frontier_pareto.csv", *store_paths]
    if args.plot:
        from .plotting import render_frontier

        outputs.append(
            render_frontier(
                out / "frontier.csv", out / "frontier.png", out / "frontier_pareto.csv"
            )
        )
    print(f"{len(entries)} configurations, {len(pareto)} on the frontier")
    print(f"{'lambda':>8}  {'A':>12}  {'C':>12}  {'f':>12}")
    for entry in pareto:
        m = entry.metrics
        print(
            f"{entry.lam:>8g}  {m.relative_accuracy:>12.6f}  "
            f"{m.relative_complexity:>12.6f}  {m.objective:>12.6f}"
        )
    _make_report(
        "sweep",
        _trace_digests(args.trace),
        {
            "start": args.start,
            "end": args.end,
            "step": args.step,
            "algo": args.algo,
            "threshold": args.threshold,
            "golden_tol": args.golden_tol,
            "threads": args.threads,
        },
        outputs,
        started,
    ).write(out / "run_report.json")
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    trace, costs = load_trace(args.trace)
    config_path = Path(args.config)
    if not config_path.is_file():
        raise MissingFile(f"config not found: {config_path}")
    entry = search.FrontierEntry.from_json_dict(json.loads(config_path.read_text()))
    outcomes, simulated = runtime.simulate(trace, costs, entry.config, entry.lam)
    direct = evaluate(trace, costs, entry.config, entry.lam)
    if (
        simulated.exit_count != direct.exit_count
        or simulated.exit_correct != direct.exit_correct
        or simulated.relative_accuracy != direct.relative_accuracy
        or simulated.relative_complexity != direct.relative_complexity
        or simulated.objective != direct.objective
    ):
        raise InternalCheckFailed(
            "per-sample simulation disagrees with set-formula metrics"
        )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sample_id", "exit_position", "exit_index", "confidence", "correct", "cost"]
        )
        for o in outcomes:
            writer.writerow(
                [
                    o.sample_id,
                    o.exit_position,
                    o.exit_index,
                    format_number(o.confidence),
                    int(o.correct),
                    format_number(o.cost),
                ]
            )
    _print_report(simulated)
    inputs = _trace_digests(args.trace)
    inputs[str(config_path)] = _sha256(config_path)
    _make_report("simulate", inputs, {}, [out], started).write(
        out.with_suffix(".run.json")
    )
    return EXIT_OK


def cmd_baseline(args) -> int:
    started = time.perf_counter()
    _check_lambda_arg(args.lam)
    trace, costs = load_trace(args.trace)
    if args.grid < 1:
        raise EmptyGrid(f"grid size must be at least 1, got {args.grid}")
    hosts = [
        pos0 for pos0 in range(trace.position_count - 1)
        if trace.candidates[pos0] >= args.k_fixed
    ]
    if args.k_fixed < 1 or (not hosts and trace.position_count > 1):
        print(
            f"error: candidate {args.k_fixed} out of range at every position",
            file=sys.stderr,
        )
        return EXIT_INPUT
    grid = [float(v) for v in np.linspace(0.0, 1.0, args.grid)]
    rows = []
    best_t, best_report = None, None
    for t in grid:
        config = search.uniform_config(trace, args.k_fixed, t)
        report = evaluate(trace, costs, config, args.lam)
        rows.append((t, report))
        if best_report is None or report.objective <= best_report.objective:
            best_t, best_report = t, report
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "A", "C", "f"])
        for t, report in rows:
            writer.writerow(
                [
                    format_number(t),
                    format_number(report.relative_accuracy),
                    format_number(report.relative_complexity),
                    format_number(report.objective),
                ]
            )
    print(
        f"best uniform t = {format_number(best_t)}  "
        f"A = {format_number(best_report.relative_accuracy)}  "
        f"C = {format_number(best_report.relative_complexity)}  "
        f"f = {format_number(best_report.objective)}"
    )
    _make_report(
        "baseline",
        _trace_digests(args.trace),
        {"lambda": args.lam, "k_fixed": args.k_fixed, "grid": args.grid},
        [out],
        started,
    ).write(out.with_suffix(".run.json"))
    return EXIT_OK


def cmd_standalone(args) -> int:
    started = time.perf_counter()
    trace, costs = load_trace(args.trace)
    rows = search.standalone_exits(trace, costs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["position", "exit_index", "accuracy", "complexity"])
        for position, k, accuracy, complexity in rows:
            writer.writerow(
                [position, k, format_number(accuracy), format_number(complexity)]
            )
    for position, k, accuracy, complexity in rows:
        print(
            f"exit ({position},{k}): accuracy = {format_number(accuracy)}  "
            f"complexity = {format_number(complexity)}"
        )
    _make_report(
        "standalone", _trace_digests(args.trace), {}, [out], started
    ).write(out.with_suffix(".run.json"))
    return EXIT_OK


def cmd_validate(args) -> int:
    trace, costs = load_trace(args.trace)
    print(
        f"OK: M={trace.sample_count} N={trace.position_count} "
        f"K={list(trace.candidates)} a_ori={format_number(costs.base_accuracy)}"
    )
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plotting import render_frontier

    frontier = Path(args.frontier)
    if not frontier.is_file():
        raise MissingFile(f"frontier csv not found: {frontier}")
    out = render_frontier(frontier, args.out, args.pareto)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_synthesize(args) -> int:
    candidates = [int(v) for v in args.candidates.split(",") if v.strip() != ""]
    trace, costs = synthesize_trace(
        seed=args.seed,
        samples=args.samples,
        positions=args.positions,
        candidates=candidates,
        calibration=args.calibration,
    )
    name = args.name or f"synthetic-seed{args.seed}"
    manifest = write_trace(trace, costs, args.out, name=name)
    print(f"wrote {manifest}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dyce",
        description="Search, simulate and switch early-exit configurations over recorded traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_trace(p):
        p.add_argument("--trace", required=True, help="trace directory or manifest path")

    def add_search_flags(p):
        p.add_argument(
            "--algo",
            choices=["single-pass", "iterative"],
            default="single-pass",
            help="search algorithm",
        )
        p.add_argument(
            "--threshold",
            choices=["exact", "golden"],
            default="exact",
            help="per-position threshold minimizer",
        )
        p.add_argument("--golden-tol", type=float, default=1e-4)

    p = sub.add_parser("search", help="search one configuration for one lambda")
    add_trace(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    add_search_flags(p)
    p.add_argument("--out", default="config.json")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("sweep", help="search a lambda grid and build the config store")
    add_trace(p)
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--end", type=float, default=1.0)
    p.add_argument("--step", type=float, default=0.01)
    add_search_flags(p)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--plot", action="store_true", help="also render frontier.png")
    p.add_argument("--out", default="sweep_out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="replay a stored configuration per sample")
    add_trace(p)
    p.add_argument("--config", required=True, help="config.json or a store entry")
    p.add_argument("--out", default="outcomes.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("baseline", help="uniform-threshold baseline over a grid")
    add_trace(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--k-fixed", dest="k_fixed", type=int, required=True)
    p.add_argument("--grid", type=int, default=1001, help="uniform grid size in [0,1]")
    p.add_argument("--out", default="baseline.csv")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("standalone", help="each exit alone with threshold 0")
    add_trace(p)
    p.add_argument("--out", default="standalone.csv")
    p.set_defaults(func=cmd_standalone)

    p = sub.add_parser("validate", help="load a trace and report violations")
    add_trace(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plot", help="render a frontier image from frontier.csv")
    p.add_argument("--frontier", required=True)
    p.add_argument("--pareto", default=None)
    p.add_argument("--out", default="frontier.png")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("synthesize", help="write a deterministic synthetic trace")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--positions", type=int, required=True)
    p.add_argument("--candidates", required=True, help="comma list, one count per position")
    p.add_argument("--calibration", type=float, default=0.8)
    p.add_argument("--name", default=None)
    p.add_argument("--out", required=True, help="output trace directory")
    p.set_defaults(func=cmd_synthesize)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InternalCheckFailed as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except _SEARCH_ERRORS as exc:
        print(f"search error: {exc}", file=sys.stderr)
        return EXIT_SEARCH


if __name__ == "__main__":
    sys.exit(main())
