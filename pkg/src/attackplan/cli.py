"""Command-line entry point: generate, transform, plan, validate, run, bench."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import bench, scenario
from .executor import MalformedPlanError, execute_plan
from .exploitdb import (
    Catalog,
    CatalogError,
    generate_synthetic_catalog,
    load_catalog,
    save_catalog,
)
from .naming import NameTable
from .netmodel import SchemaError, WorkspaceError, load_workspace, save_workspace
from .planner import (
    Budget,
    BudgetExceeded,
    PddlError,
    Plan,
    PlanInvalid,
    ground,
    parse,
    render_plan,
    search,
    validate_plan,
)
from .transform import Goal, UnregisteredConstantError, transform

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNSOLVABLE = 2
EXIT_EXEC_FAILED = 3
EXIT_BUDGET = 4

DEFAULT_CATALOG_EXPLOITS = 40


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _read(path: str | Path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    p = out_dir / name
    p.write_text(text)
    return p


def _budget(args) -> Budget:
    mem = int(args.mem_budget * 2**20) if args.mem_budget else None
    return Budget(time_limit=args.time_budget, mem_limit=mem)


def _catalog(args) -> Catalog:
    if args.catalog:
        return load_catalog(_read(args.catalog))
    return generate_synthetic_catalog(args.exploits, 6, seed=args.seed)


def _generate(args, catalog: Catalog) -> scenario.GroundTruthNetwork:
    if args.topology == "star":
        return scenario.generate_star(args.machines, args.subnets, seed=args.seed, catalog=catalog)
    return scenario.generate_chain(args.depth, args.hosts_per_subnet, seed=args.seed,
                                   n_machines=args.machines, catalog=catalog)


def _goal(specs: list[str] | None, fallback: list[str] | None = None) -> Goal:
    if specs:
        return Goal.parse(specs)
    if fallback:
        return Goal.compromise(*fallback)
    raise UsageError("at least one --goal is required")


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    catalog = _catalog(args)
    gt = _generate(args, catalog)
    out = Path(args.out)
    _write(out, "ground_truth.json", scenario.save_ground_truth(gt))
    _write(out, "workspace.json", save_workspace(scenario.export_workspace(gt)))
    _write(out, "catalog.json", save_catalog(catalog))
    print(f"{len(gt.hosts) - 1} machines, {len(gt.networks)} segments, target {' '.join(gt.targets)}")
    print(f"wrote ground_truth.json workspace.json catalog.json to {out}")
    return EXIT_OK


def cmd_transform(args) -> int:
    if not args.catalog:
        raise UsageError("transform needs --catalog")
    ws = load_workspace(_read(args.workspace))
    catalog = load_catalog(_read(args.catalog))
    result = transform(ws, catalog, _goal(args.goal))
    out = Path(args.out)
    _write(out, "domain.pddl", result.domain)
    _write(out, "problem.pddl", result.problem)
    _write(out, "mapping.tsv", result.mapping)
    print(f"wrote domain.pddl problem.pddl mapping.tsv to {out}")
    return EXIT_OK


def _mapping(path: str | None) -> NameTable | None:
    return NameTable.from_tsv(_read(path)) if path else None


def cmd_plan(args) -> int:
    task = parse(_read(args.domain), _read(args.problem))
    try:
        gtask = ground(task)
        result = search(gtask, args.mode, _budget(args))
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc.what}", file=sys.stderr)
        return EXIT_BUDGET
    if not result.solved:
        print("unsolvable")
        return EXIT_UNSOLVABLE
    print(render_plan(result.plan, _mapping(args.mapping)), end="")
    if args.out:
        Path(args.out).write_text(result.plan.to_ipc())
    return EXIT_OK


def cmd_validate(args) -> int:
    task = parse(_read(args.domain), _read(args.problem))
    plan = Plan.from_ipc(_read(args.plan), task)
    try:
        cost = validate_plan(task, plan)
    except PlanInvalid as exc:
        print(f"invalid plan: {exc}")
        return EXIT_EXEC_FAILED
    print(f"valid plan, {len(plan)} steps, cost {cost:g}")
    if args.ground_truth:
        if not (args.catalog and args.mapping and args.goal):
            raise UsageError("replay on --ground-truth needs --catalog, --mapping and --goal")
        gt = scenario.load_ground_truth(_read(args.ground_truth))
        trace = execute_plan(plan, gt, load_catalog(_read(args.catalog)), _goal(args.goal),
                             NameTable.from_tsv(_read(args.mapping)))
        print(trace.format_log(), end="")
        if not trace.succeeded:
            return EXIT_EXEC_FAILED
    return EXIT_OK


def cmd_run(args) -> int:
    catalog = _catalog(args)
    gt = _generate(args, catalog)
    ws = scenario.export_workspace(gt)
    goal = _goal(args.goal, gt.targets)
    tr = transform(ws, catalog, goal)
    if args.out:
        out = Path(args.out)
        _write(out, "ground_truth.json", scenario.save_ground_truth(gt))
        _write(out, "workspace.json", save_workspace(ws))
        _write(out, "catalog.json", save_catalog(catalog))
        _write(out, "domain.pddl", tr.domain)
        _write(out, "problem.pddl", tr.problem)
        _write(out, "mapping.tsv", tr.mapping)
    try:
        result = search(ground(parse(tr.domain, tr.problem)), args.mode, _budget(args))
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc.what}", file=sys.stderr)
        return EXIT_BUDGET
    if not result.solved:
        print("unsolvable")
        return EXIT_UNSOLVABLE
    print(render_plan(result.plan, tr.names), end="")
    if args.out:
        _write(Path(args.out), "plan.txt", result.plan.to_ipc())
    trace = execute_plan(result.plan, gt, catalog, goal, tr.names)
    print()
    print(trace.format_log(), end="")
    if args.out:
        _write(Path(args.out), "trace.json", trace.to_json())
    return EXIT_OK if trace.succeeded else EXIT_EXEC_FAILED


def cmd_bench(args) -> int:
    base = bench.STANDARD_SWEEPS[args.variable]
    overrides = {
        "seeds": tuple(range(args.seed, args.seed + args.seeds)),
        "mode": args.mode,
        "time_budget": args.time_budget,
        "mem_budget": int(args.mem_budget * 2**20) if args.mem_budget else None,
        "isolate": not args.in_process,
        "workers": args.workers,
    }
    if args.values:
        overrides["values"] = args.values
    for name in ("machines", "pivots", "actions", "goals"):
        v = getattr(args, f"fixed_{name}")
        if v is not None:
            overrides[name] = v
    spec = dataclasses.replace(base, **overrides)

    def progress(r):
        print(f"{r.variable}={r.value} seed={r.seed} {r.status} ground={r.ground_ms:.0f}ms "
              f"search={r.search_ms:.0f}ms mem={r.peak_mem_bytes >> 20}MiB", file=sys.stderr)

    results = bench.run_sweep(spec, progress)
    text = bench.emit_gnuplot(results) if args.gnuplot else bench.emit_csv(results)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--topology", choices=("star", "chain"), default="star")
    p.add_argument("--machines", type=_positive_int, default=None,
                   help="machine count (star default 60; chain default: 3 per segment)")
    p.add_argument("--depth", type=_positive_int, default=4, help="pivoting steps for --topology chain")
    p.add_argument("--subnets", type=_positive_int, default=5, help="leaf segments for --topology star")
    p.add_argument("--hosts-per-subnet", type=_positive_int, default=3)
    p.add_argument("--catalog", help="exploit catalog JSON (default: seeded synthetic catalog)")
    p.add_argument("--exploits", type=_positive_int, default=DEFAULT_CATALOG_EXPLOITS,
                   help="size of the synthetic catalog when --catalog is absent")
    p.add_argument("--seed", type=int, default=0)


def _planner_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=("greedy", "optimal"), default="greedy")
    p.add_argument("--time-budget", type=_positive_float, help="seconds")
    p.add_argument("--mem-budget", type=_positive_float, help="MiB of peak resident memory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attackplan", description="Attack planning over a network workspace.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a seeded ground truth, its workspace and a catalog")
    _scenario_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("transform", help="emit domain.pddl, problem.pddl and mapping.tsv")
    p.add_argument("workspace", help="workspace JSON")
    p.add_argument("--catalog", required=False)
    p.add_argument("--goal", action="append", help="host or host:privilege (repeatable)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("plan", help="solve a PDDL task and print the plan")
    p.add_argument("--domain", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--mapping", help="mapping.tsv for rendering original names")
    p.add_argument("--out", help="write the plan in IPC format")
    _planner_flags(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("validate", help="check a plan against a task, optionally replay it on a ground truth")
    p.add_argument("plan", help="plan file in IPC format")
    p.add_argument("--domain", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--ground-truth")
    p.add_argument("--catalog")
    p.add_argument("--mapping")
    p.add_argument("--goal", action="append")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="generate, transform, plan and execute in one go")
    _scenario_flags(p)
    _planner_flags(p)
    p.add_argument("--goal", action="append", help="host or host:privilege (default: the scenario target)")
    p.add_argument("--out", help="directory for all intermediate files")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="run a scaling sweep and emit CSV")
    p.add_argument("variable", choices=bench.VARIABLES)
    p.add_argument("--values", type=_int_list, help="comma-separated, strictly increasing")
    p.add_argument("--seeds", type=_positive_int, default=3, help="seeds per point")
    p.add_argument("--seed", type=int, default=1, help="first seed")
    for name in ("machines", "pivots", "actions", "goals"):
        p.add_argument(f"--{name}", dest=f"fixed_{name}", type=_positive_int, help=f"fixed {name} value")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--in-process", action="store_true", help="no per-run process; memory from tracemalloc")
    p.add_argument("--gnuplot", action="store_true", help="per-value medians in a gnuplot data layout")
    p.add_argument("--out", help="output file (default stdout)")
    _planner_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def _fill_scenario_defaults(args) -> None:
    if getattr(args, "topology", None) is None:
        return
    if args.topology == "star" and args.machines is None:
        args.machines = 60


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    _fill_scenario_defaults(args)
    try:
        return args.func(args)
    except (UsageError, SchemaError, WorkspaceError, CatalogError, PddlError,
            UnregisteredConstantError, MalformedPlanError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
