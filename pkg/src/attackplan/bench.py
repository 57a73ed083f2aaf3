"""Scaling sweeps: machines, pivot depth, catalog size and goal count.

Each run generates a seeded scenario, transforms, grounds, searches and
replays the plan on the ground truth. By default every run happens in a
fresh spawned process so that its peak resident memory is its own.
"""

from __future__ import annotations

import csv
import io
import multiprocessing as mp
import resource
import statistics
import time
import tracemalloc
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache

from .executor import execute_plan
from .exploitdb import Catalog, generate_synthetic_catalog
from .planner import Budget, BudgetExceeded, ground, parse, search
from .scenario import export_workspace, generate_chain, generate_star, pick_goal_hosts
from .transform import Goal, transform

VARIABLES = ("machines", "pivots", "actions", "goals")
CSV_COLUMNS = ("variable", "value", "seed", "ground_ms", "search_ms", "peak_mem_bytes", "plan_cost", "plan_len", "status")


@dataclass(frozen=True)
class SweepSpec:
    """One sweep. Fields other than ``variable`` hold the fixed values."""

    variable: str
    values: tuple[int, ...]
    seeds: tuple[int, ...] = (1, 2, 3)
    mode: str = "greedy"
    machines: int = 200
    pivots: int = 1
    actions: int = 1600  # action templates; exploits = round(actions / variants)
    goals: int = 1
    variants: int = 6
    subnets: int = 5
    hosts_per_subnet: int = 3
    catalog_seed: int = 7
    time_budget: float | None = None
    mem_budget: int | None = None
    node_budget: int | None = None
    isolate: bool = True
    workers: int = 1

    def __post_init__(self) -> None:
        if self.variable not in VARIABLES:
            raise ValueError(f"unknown sweep variable {self.variable!r}; choose from {VARIABLES}")
        if not self.values:
            raise ValueError("a sweep needs at least one value")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        if not self.seeds:
            raise ValueError("a sweep needs at least one seed")
        if self.mode not in ("greedy", "optimal"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def budget(self) -> Budget:
        return Budget(self.node_budget, self.time_budget, self.mem_budget)


# Fixed values follow the four scaling experiments; value lists are desk-sized.
STANDARD_SWEEPS: dict[str, SweepSpec] = {
    "machines": SweepSpec("machines", (60, 120, 240, 480), pivots=1, actions=1600),
    "pivots": SweepSpec("pivots", tuple(range(1, 21)), machines=120, actions=1600),
    "actions": SweepSpec("actions", (720, 960, 1200, 1440), machines=200, pivots=1),
    "goals": SweepSpec("goals", (1, 25, 50, 75, 100), machines=200, actions=1600),
}


@dataclass
class RunResult:
    variable: str
    value: int
    seed: int
    ground_ms: float
    search_ms: float
    peak_mem_bytes: int
    plan_cost: float | None
    plan_len: int | None
    status: str
    detail: dict = field(default_factory=dict)

    def row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


@lru_cache(maxsize=8)
def bench_catalog(n_templates: int, variants: int, seed: int) -> Catalog:
    return generate_synthetic_catalog(max(1, round(n_templates / variants)), variants, seed=seed)


def build_scenario(spec: SweepSpec, value: int, seed: int):
    """Ground truth, catalog and goal for one (value, seed) point."""
    params = {v: getattr(spec, v) for v in VARIABLES}
    params[spec.variable] = value
    catalog = bench_catalog(params["actions"], spec.variants, spec.catalog_seed)
    if params["pivots"] > 1 or spec.variable == "pivots":
        gt = generate_chain(params["pivots"], spec.hosts_per_subnet, seed=seed,
                            n_machines=params["machines"], catalog=catalog)
    else:
        gt = generate_star(params["machines"], spec.subnets, seed=seed, catalog=catalog)
    if params["goals"] > 1:
        hosts = pick_goal_hosts(gt, params["goals"], seed=seed, catalog=catalog)
    else:
        hosts = list(gt.targets)
    return gt, catalog, Goal.compromise(*hosts)


def run_point(spec: SweepSpec, value: int, seed: int, measure_memory: str = "rss") -> RunResult:
    """One run; never raises for budget overruns or failed executions."""
    gt, catalog, goal = build_scenario(spec, value, seed)
    ws = export_workspace(gt)
    tr = transform(ws, catalog, goal)
    if measure_memory == "tracemalloc":
        tracemalloc.start()
    t0 = time.perf_counter()
    status, cost, length, detail = "error", None, None, {}
    t1 = t0
    try:
        gtask = ground(parse(tr.domain, tr.problem))
        t1 = time.perf_counter()
        detail.update({k: v for k, v in gtask.stats.items() if isinstance(v, int)})
        res = search(gtask, spec.mode, spec.budget())
        t2 = time.perf_counter()
        status = res.status
        if res.solved:
            cost, length = res.plan.total_cost, len(res.plan)
            trace = execute_plan(res.plan, gt, catalog, goal, tr.names)
            if not trace.succeeded:
                status = "execution-failed"
                detail["failure"] = f"{trace.failed_step}: {trace.reason}"
        detail.update({k: v for k, v in res.stats.items() if isinstance(v, int)})
    except BudgetExceeded as exc:
        t2 = time.perf_counter()
        status = "budget-exceeded"
        detail["budget"] = exc.what
    if measure_memory == "tracemalloc":
        peak = tracemalloc.get_traced_memory()[1]
        tracemalloc.stop()
    else:
        peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024
    return RunResult(spec.variable, value, seed, round((t1 - t0) * 1e3, 3), round((t2 - t1) * 1e3, 3),
                     int(peak), cost, length, status, detail)


def _run_star(args) -> RunResult:
    return run_point(*args)


def run_sweep(spec: SweepSpec, progress=None) -> list[RunResult]:
    """All (value, seed) runs of ``spec``, ordered by value then seed."""
    jobs = [(spec, v, s) for v in spec.values for s in spec.seeds]
    results: list[RunResult] = []
    if spec.isolate:
        ctx = mp.get_context("spawn")
        with ctx.Pool(spec.workers, maxtasksperchild=1) as pool:
            for r in pool.imap(_run_star, [(sp, v, s, "rss") for sp, v, s in jobs]):
                results.append(r)
                if progress:
                    progress(r)
    else:
        for sp, v, s in jobs:
            r = run_point(sp, v, s, "tracemalloc")
            results.append(r)
            if progress:
                progress(r)
    return results


def emit_csv(results: list[RunResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        w.writerow(["" if x is None else x for x in r.row()])
    return buf.getvalue()


def load_csv(text: str) -> list[RunResult]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(RunResult(
            row["variable"], int(row["value"]), int(row["seed"]), float(row["ground_ms"]),
            float(row["search_ms"]), int(row["peak_mem_bytes"]),
            float(row["plan_cost"]) if row["plan_cost"] else None,
            int(row["plan_len"]) if row["plan_len"] else None, row["status"],
        ))
    return out


@dataclass
class PointSummary:
    value: int
    runs: int
    solved: int
    ground_ms: float
    search_ms: float
    peak_mem_bytes: float


def summarize(results: list[RunResult]) -> list[PointSummary]:
    """Per-value medians over seeds."""
    by_value: dict[int, list[RunResult]] = {}
    for r in results:
        by_value.setdefault(r.value, []).append(r)
    return [
        PointSummary(
            v, len(rs), sum(r.status == "solved" for r in rs),
            statistics.median(r.ground_ms for r in rs),
            statistics.median(r.search_ms for r in rs),
            statistics.median(r.peak_mem_bytes for r in rs),
        )
        for v, rs in sorted(by_value.items())
    ]


def emit_gnuplot(results: list[RunResult]) -> str:
    """Whitespace-separated per-value medians, one block per variable."""
    lines = []
    variables = sorted({r.variable for r in results})
    for var in variables:
        lines.append(f"# variable={var}")
        lines.append("# " + " ".join(f.name for f in fields(PointSummary)))
        for p in summarize([r for r in results if r.variable == var]):
            lines.append(" ".join(str(round(x, 3)) for x in asdict(p).values()))
        lines.append("")
        lines.append("")
    return "\n".join(lines)
