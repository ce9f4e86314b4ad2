"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 domain error (bad input files,
infeasible generation, rejected faults and the like).  Primary outputs are
deterministic in their flags; the wall-clock time and full configuration of
each run go to a sidecar ``<output>.log.json`` file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .evaluator import CalibrationError, calibrate, evaluate, load_calibration
from .itinerary import ItineraryParseError, itinerary_to_json, load_itinerary, render_itinerary
from .orchestrator import ImpairedAgent, ProtocolViolation, SkillLibrary, SolverAgent, run_tdag
from .orchestrator.protocol import StdioAgent
from .reporting import ReportError, build_report, error_table, report_csv, report_json
from .scenarios import (FAULTS, FaultRejected, GenerationError, GenParams, generate_suite,
                        generate_task, generate_world, inject_fault, load_suite, write_suite)
from .simulator import simulate
from .solver import PlanProblem, SamplingError, solve, solve_exact, solve_heuristic
from .task import TaskError, check_task_against_world, load_task
from .world import WorldError, load_world

OUTPUT_ENV = "TRAVELSIM_OUTPUT_DIR"
DOMAIN_ERRORS = (WorldError, TaskError, ItineraryParseError, CalibrationError, GenerationError,
                 FaultRejected, SamplingError, ReportError, ProtocolViolation, FileNotFoundError,
                 json.JSONDecodeError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _out_dir(args) -> Path:
    return Path(args.out_dir or os.environ.get(OUTPUT_ENV) or ".")


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _sidecar(primary: Path | None, args, started: float) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    record = {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "elapsed_s": round(time.time() - started, 3),
              "version": __version__, "argv": sys.argv[1:], "config": config}
    text = json.dumps(record, indent=2, sort_keys=True, default=str) + "\n"
    if primary is None:
        sys.stderr.write(text)
    else:
        _write(primary.with_name(primary.name + ".log.json"), text)


def _emit(args, text: str, default_name: str | None = None) -> Path | None:
    """Write ``text`` to --out (or the output dir) and echo to stdout when no file is given."""
    target = getattr(args, "out", None)
    if target is None and default_name is not None and getattr(args, "out_dir", None):
        target = str(_out_dir(args) / default_name)
    if target is None:
        sys.stdout.write(text)
        return None
    return _write(Path(target), text)


def _load_pair(args):
    world = load_world(args.world)
    task = load_task(args.task)
    defects = check_task_against_world(task, world)
    if defects:
        raise TaskError("task does not match world: " + "; ".join(defects))
    return world, task


# -- subcommands ---------------------------------------------------------------

def cmd_gen(args):
    if args.what == "world":
        params = GenParams(num_cities=args.cities, attractions_per_city=args.attractions,
                           trips_per_city_pair=args.trips, route_density=args.route_density,
                           horizon_days=args.days, seed=args.seed)
        try:
            world = generate_world(params)
        except ValueError as exc:
            raise GenerationError(str(exc)) from None
        return _emit(args, world.to_json(), f"world-{args.seed}.json")
    if args.what == "task":
        if not args.world:
            raise UsageError("gen task requires --world")
        world = load_world(args.world)
        task = generate_task(world, args.type, args.seed, objective=args.objective)
        if args.fault:
            world = inject_fault(world, task, args.fault, seed=args.seed)
            if args.faulted_world:
                _write(Path(args.faulted_world), world.to_json())
        return _emit(args, task.to_json(), f"task-{args.type}-{args.seed}.json")
    params = GenParams(num_cities=args.cities, attractions_per_city=args.attractions,
                       trips_per_city_pair=args.trips, route_density=args.route_density,
                       horizon_days=args.days)
    entries = generate_suite(args.name, args.count, args.seed, params=params, fault=args.fault)
    manifest = write_suite(entries, _out_dir(args), args.name)
    print(str(manifest))
    return manifest


def cmd_solve(args):
    world, task = _load_pair(args)
    problem = PlanProblem(world, task)
    if args.method == "exact":
        sol = solve_exact(problem, args.node_budget)
    elif args.method == "heuristic":
        sol = solve_heuristic(problem, args.time_budget_ms, args.seed)
    else:
        sol = solve(problem, args.node_budget, args.time_budget_ms, args.seed)
    out = {"status": sol.status, "objective": task.objective, "objective_value": sol.objective_value,
           "itinerary": itinerary_to_json(sol.itinerary, task.start_date)}
    path = _emit(args, json.dumps(out, indent=2) + "\n", "solution.json")
    if args.itinerary_out:
        _write(Path(args.itinerary_out), render_itinerary(sol.itinerary, task.start_date) + "\n")
    return path


def _read_itinerary(args, task):
    return load_itinerary(Path(args.itinerary).read_text(), task.start_date)


def cmd_simulate(args):
    world, task = _load_pair(args)
    trace = simulate(world, task, _read_itinerary(args, task))
    return _emit(args, trace.to_json(), "trace.json")


def cmd_score(args):
    world, task = _load_pair(args)
    trace = simulate(world, task, _read_itinerary(args, task))
    score = evaluate(trace, task, load_calibration(args.calib))
    return _emit(args, score.to_json(), "score.json")


def cmd_calibrate(args):
    world, task = _load_pair(args)
    calib = calibrate(world, task, n=args.n, seed=args.seed)
    return _emit(args, calib.to_json(), "calibration.json")


def _make_agent(args):
    if args.agent == "stdio":
        if not args.agent_cmd:
            raise UsageError("--agent stdio requires --agent-cmd")
        return StdioAgent(args.agent_cmd.split())
    agent = SolverAgent(node_budget=args.node_budget, time_budget_ms=args.time_budget_ms, seed=args.seed)
    return ImpairedAgent(agent) if args.agent == "impaired" else agent


def _run_one(job):
    world, task, calib, opts = job
    agent = _make_agent(opts)
    try:
        it, log, _ = run_tdag(world, task, agent, SkillLibrary(), opts.mode == "static")
    finally:
        if isinstance(agent, StdioAgent):
            agent.close()
    trace = simulate(world, task, it)
    if calib is None:
        calib = calibrate(world, task, n=opts.calib_n, seed=opts.seed)
    return task, evaluate(trace, task, calib), trace, log, it


def cmd_run(args):
    if bool(args.suite) == bool(args.world and args.task):
        raise UsageError("run needs either --suite or both --world and --task")
    if args.suite:
        jobs = []
        manifest = Path(args.suite)
        for row, world, task in load_suite(manifest):
            calib = load_calibration(manifest.parent / row["calibration"]) if row.get("calibration") else None
            jobs.append((world, task, calib, args))
    else:
        world, task = _load_pair(args)
        jobs = [(world, task, load_calibration(args.calib) if args.calib else None, args)]
    if args.jobs > 1 and args.agent != "stdio":
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    out = _out_dir(args)
    method = args.method_name or f"tdag-{args.mode}"
    report = build_report([(t, s, tr, log) for t, s, tr, log, _ in results], method)
    runs = {t.id: {"itinerary": itinerary_to_json(it, t.start_date), "log": log.to_dict()}
            for t, _, _, log, it in results}
    _write(out / f"{method}.runs.json", json.dumps(runs, indent=2, sort_keys=True) + "\n")
    _write(out / f"{method}.report.csv", report_csv(report))
    path = _write(out / f"{method}.report.json", report_json(report))
    print(str(path))
    return path


def cmd_report(args):
    reports = {}
    for p in args.reports:
        data = json.loads(Path(p).read_text())
        name = data.get("method") or Path(p).stem
        if name in reports:
            raise ReportError(f"two reports for method {name!r}")
        reports[name] = data
    summary = {
        "methods": {m: {k: r[k] for k in ("suite", "tasks", "per_type_mean", "overall_mean",
                                          "binary_rate", "fine_grained_mean")}
                    for m, r in reports.items()},
        "errors": error_table(reports),
    }
    return _emit(args, json.dumps(summary, indent=2, sort_keys=True) + "\n", "comparison.json")


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="travelsim", description="Travel-planning benchmark harness.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, out=True):
        sp.add_argument("--seed", type=int, default=0)
        if out:
            sp.add_argument("--out", help="output file (default: stdout)")
            sp.add_argument("--out-dir", help=f"output directory (default: ${OUTPUT_ENV} or .)")

    def pair(sp):
        sp.add_argument("--world", required=True)
        sp.add_argument("--task", required=True)

    def budgets(sp):
        sp.add_argument("--node-budget", type=int, default=200_000)
        sp.add_argument("--time-budget-ms", type=int, default=2000)

    g = sub.add_parser("gen", help="generate worlds, tasks or suites")
    g.add_argument("what", choices=("world", "task", "suite"))
    g.add_argument("--cities", type=int, default=3)
    g.add_argument("--attractions", type=int, default=3)
    g.add_argument("--trips", type=int, default=3)
    g.add_argument("--route-density", type=float, default=0.5)
    g.add_argument("--days", type=int, default=2)
    g.add_argument("--world")
    g.add_argument("--type", type=int, choices=(1, 2, 3), default=1)
    g.add_argument("--objective", choices=("cost_cents", "total_minutes"))
    g.add_argument("--fault", choices=FAULTS)
    g.add_argument("--faulted-world", help="gen task --fault: where to write the faulted world")
    g.add_argument("--name", default="suite")
    g.add_argument("--count", type=int, default=10)
    common(g)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="plan an itinerary")
    pair(s)
    s.add_argument("--method", choices=("auto", "exact", "heuristic"), default="auto")
    s.add_argument("--itinerary-out", help="also write the plan in text form")
    budgets(s)
    common(s)
    s.set_defaults(func=cmd_solve)

    m = sub.add_parser("simulate", help="execute an itinerary and print its trace")
    pair(m)
    m.add_argument("--itinerary", required=True)
    common(m)
    m.set_defaults(func=cmd_simulate)

    c = sub.add_parser("score", help="score an itinerary")
    pair(c)
    c.add_argument("--itinerary", required=True)
    c.add_argument("--calib", required=True)
    common(c)
    c.set_defaults(func=cmd_score)

    k = sub.add_parser("calibrate", help="derive the efficiency band from sampled plans")
    pair(k)
    k.add_argument("--n", type=int, default=50)
    common(k)
    k.set_defaults(func=cmd_calibrate)

    r = sub.add_parser("run", help="run the decomposition loop on a task or suite")
    r.add_argument("--world")
    r.add_argument("--task")
    r.add_argument("--suite", help="suite manifest")
    r.add_argument("--calib", help="calibration for a single task")
    r.add_argument("--calib-n", type=int, default=50)
    r.add_argument("--mode", choices=("static", "dynamic"), default="dynamic")
    r.add_argument("--agent", choices=("solver", "impaired", "stdio"), default="solver")
    r.add_argument("--agent-cmd", help="command line of an external agent (with --agent stdio)")
    r.add_argument("--method-name", help="name used in report files (default tdag-<mode>)")
    r.add_argument("--jobs", type=int, default=1)
    budgets(r)
    common(r)
    r.set_defaults(func=cmd_run)

    rp = sub.add_parser("report", help="compare run reports across methods")
    rp.add_argument("reports", nargs="+", help="report.json files from run")
    common(rp)
    rp.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    started = time.time()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        primary = args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _sidecar(primary if isinstance(primary, Path) else None, args, started)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
