"""Greedy best-first and optimal search over a grounded delete-free task."""

from __future__ import annotations

import heapq
import itertools
import math
import resource
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .grounding import GroundTask
from .heuristic import RelaxedPlanHeuristic
from .pddl import Task

SOLVED = "solved"
UNSOLVABLE = "unsolvable"


class BudgetExceeded(RuntimeError):
    def __init__(self, what: str, stats: dict | None = None):
        super().__init__(f"budget exceeded: {what}")
        self.what = what
        self.stats = stats or {}


class PlanInvalid(ValueError):
    def __init__(self, step: int, reason: str):
        super().__init__(f"step {step}: {reason}")
        self.step = step
        self.reason = reason


@dataclass(frozen=True)
class Budget:
    max_nodes: int | None = None
    time_limit: float | None = None  # seconds
    mem_limit: int | None = None  # bytes of peak resident memory

    def check(self, nodes: int, started: float, stats: dict) -> None:
        if self.max_nodes is not None and nodes > self.max_nodes:
            raise BudgetExceeded(f"more than {self.max_nodes} nodes", stats)
        if self.time_limit is not None and time.perf_counter() - started > self.time_limit:
            raise BudgetExceeded(f"more than {self.time_limit} s", stats)
        if self.mem_limit is not None and nodes % 64 == 0 and peak_rss() > self.mem_limit:
            raise BudgetExceeded(f"more than {self.mem_limit} bytes of memory", stats)


def peak_rss() -> int:
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024


@dataclass(frozen=True)
class PlanStep:
    action: str
    args: tuple[str, ...]
    cost: float = 0.0

    def __str__(self) -> str:
        return f"({' '.join((self.action,) + self.args)})"


@dataclass
class Plan:
    steps: list[PlanStep] = field(default_factory=list)

    @property
    def total_cost(self) -> float:
        return float(sum(s.cost for s in self.steps))

    def __len__(self) -> int:
        return len(self.steps)

    def to_ipc(self) -> str:
        """One ``(action args)`` line per step, followed by a cost comment."""
        lines = [str(s) for s in self.steps]
        lines.append(f"; cost = {format_number(self.total_cost)} (general cost)")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_ipc(cls, text: str, task: Task | None = None) -> "Plan":
        steps = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split(";", 1)[0].strip()
            if not line:
                continue
            if not (line.startswith("(") and line.endswith(")")):
                raise ValueError(f"plan line {lineno}: expected '(action args...)'")
            parts = line[1:-1].split()
            if not parts:
                raise ValueError(f"plan line {lineno}: empty step")
            cost = 0.0
            if task is not None:
                try:
                    cost = task.domain.action(parts[0]).cost
                except KeyError:
                    raise ValueError(f"plan line {lineno}: unknown action {parts[0]}") from None
            steps.append(PlanStep(parts[0], tuple(parts[1:]), cost))
        return cls(steps)


def format_number(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


@dataclass
class SearchResult:
    status: str
    plan: Plan | None
    stats: dict = field(default_factory=dict)

    @property
    def solved(self) -> bool:
        return self.status == SOLVED


# ---------------------------------------------------------------------------
# independent validation (works on the lifted task, not the grounding)


def validate_plan(task: Task, steps: Iterable[PlanStep] | Plan) -> float:
    """Replay ``steps`` from the initial state; return the total cost.

    Raises :class:`PlanInvalid` for an unknown action, wrong arguments, an
    unsatisfied precondition, or a goal that does not hold at the end.
    """
    dom = task.domain
    state = {(p,) + args for p, args in task.problem.init}
    typed: dict[str, list[str]] = {}
    total = 0.0
    steps = list(steps.steps if isinstance(steps, Plan) else steps)
    for i, st in enumerate(steps):
        try:
            schema = dom.action(st.action)
        except KeyError:
            raise PlanInvalid(i, f"unknown action {st.action}") from None
        if len(st.args) != len(schema.parameters):
            raise PlanInvalid(i, f"{st.action} takes {len(schema.parameters)} arguments, got {len(st.args)}")
        binding = {}
        for (v, t), obj in zip(schema.parameters, st.args):
            if obj not in task.objects:
                raise PlanInvalid(i, f"unknown object {obj}")
            if not dom.is_subtype(task.objects[obj], t):
                raise PlanInvalid(i, f"{obj} is not of type {t}")
            binding[v] = obj

        def ground(atom, b):
            return (atom[0],) + tuple(b.get(a, a) for a in atom[1])

        for atom in schema.precondition:
            g = ground(atom, binding)
            if g not in state:
                raise PlanInvalid(i, f"precondition ({' '.join(g)}) does not hold")
        for ex in schema.exists:
            doms = []
            for _, t in ex.variables:
                if t not in typed:
                    typed[t] = task.objects_of_type(t)
                doms.append(typed[t])
            for combo in itertools.product(*doms):
                b = dict(binding)
                b.update(zip((v for v, _ in ex.variables), combo))
                if all(ground(a, b) in state for a in ex.atoms):
                    break
            else:
                raise PlanInvalid(i, f"no witness for the existential precondition of {st.action}")
        for atom in schema.add:
            state.add(ground(atom, binding))
        total += schema.cost
    for p, args in task.problem.goal:
        if (p,) + args not in state:
            raise PlanInvalid(len(steps), f"goal ({' '.join((p,) + args)}) does not hold")
    return total


# ---------------------------------------------------------------------------
# helpers


def _justify(gt: GroundTask, actions: Sequence[int]) -> list[int]:
    """Drop steps that support neither the goal nor a later kept step."""
    needed = set(gt.goal)
    kept = []
    for a in reversed(actions):
        act = gt.actions[a]
        useful = needed.intersection(act.add)
        if useful:
            kept.append(a)
            needed -= useful
            needed.update(act.pre)
    kept.reverse()
    return kept


def _finish(gt: GroundTask, actions: Sequence[int], stats: dict, validate: bool) -> SearchResult:
    actions = _justify(gt, actions)
    plan = Plan([PlanStep(gt.actions[a].name, gt.actions[a].args, gt.actions[a].cost) for a in actions])
    if validate:
        cost = validate_plan(gt.task, plan)
        if abs(cost - plan.total_cost) > 1e-6:
            raise AssertionError(f"validator cost {cost} != plan cost {plan.total_cost}")
    stats["plan_cost"] = plan.total_cost
    stats["plan_length"] = len(plan)
    return SearchResult(SOLVED, plan, stats)


def _unsolvable(stats: dict) -> SearchResult:
    return SearchResult(UNSOLVABLE, None, stats)


@dataclass
class _Node:
    state: frozenset
    g: float
    parent: "_Node | None"
    action: int | None

    def path(self) -> list[int]:
        out = []
        n = self
        while n.parent is not None:
            out.append(n.action)
            n = n.parent
        out.reverse()
        return out


# ---------------------------------------------------------------------------
# greedy best-first search


def greedy_search(
    gt: GroundTask,
    budget: Budget = Budget(),
    helpful_pruning: bool = True,
    validate: bool = True,
) -> SearchResult:
    """Greedy best-first search with deferred evaluation.

    Successors are queued with their parent's heuristic value and evaluated
    only when popped; ties go to lower accumulated time, then lower action
    id. With ``helpful_pruning`` only relaxed-plan actions applicable in the
    expanded state are queued; if that search exhausts, it is repeated
    without pruning, so the procedure stays complete.
    """
    started = time.perf_counter()
    stats: dict = {"mode": "greedy", "expansions": 0, "evaluations": 0, "generated": 0, "restarts": 0}
    if gt.unreachable_goals:
        return _unsolvable(stats)
    passes = [True, False] if helpful_pruning else [False]
    for prune in passes:
        result = _gbfs(gt, budget, prune, stats, started)
        if result is not None:
            stats["search_seconds"] = time.perf_counter() - started
            return _finish(gt, result, stats, validate)
        stats["restarts"] += 1
    stats["search_seconds"] = time.perf_counter() - started
    return _unsolvable(stats)


def _gbfs(gt: GroundTask, budget: Budget, prune: bool, stats: dict, started: float) -> list[int] | None:
    h = RelaxedPlanHeuristic(gt)
    goal = frozenset(gt.goal)
    actions = gt.actions
    seq = itertools.count()
    open_list: list = []
    closed: set[frozenset] = set()

    def expand(node: _Node, mask: np.ndarray, rp) -> None:
        stats["expansions"] += 1
        if prune:
            succ = rp.helpful
        else:
            app = np.flatnonzero(mask[gt.pre].all(axis=1)) if len(actions) else []
            succ = [int(a) for a in app if not mask[list(actions[a].add)].all()]
        for a in succ:
            stats["generated"] += 1
            heapq.heappush(open_list, (rp.cost, rp.length, node.g + actions[a].cost, a, next(seq), node))

    root = _Node(frozenset(), 0.0, None, None)
    closed.add(root.state)
    if goal <= root.state:
        return []
    mask = h.mask(root.state)
    rp = h.evaluate(mask)
    stats["evaluations"] += 1
    if rp.is_infinite:
        return None
    expand(root, mask, rp)
    nodes = 1
    while open_list:
        _, _, g, a, _, parent = heapq.heappop(open_list)
        add = actions[a].add
        if parent.state.issuperset(add):
            continue
        state = parent.state.union(add)
        if state in closed:
            continue
        assert len(state) >= len(parent.state), "delete-free invariant violated"
        closed.add(state)
        node = _Node(state, g, parent, a)
        nodes += 1
        budget.check(nodes, started, stats)
        if goal <= state:
            return node.path()
        mask = h.mask(state)
        rp = h.evaluate(mask)
        stats["evaluations"] += 1
        if rp.is_infinite:
            continue
        expand(node, mask, rp)
    return None


# ---------------------------------------------------------------------------
# optimal search


def optimal_search(
    gt: GroundTask,
    budget: Budget = Budget(max_nodes=100_000),
    validate: bool = True,
) -> SearchResult:
    """Uniform-cost search returning a minimum-total-time plan.

    In a delete-free task applying a zero-cost action can never hurt, so
    every state is first closed under all applicable zero-cost actions and
    only positive-cost actions branch. This keeps optimality and shrinks the
    space to the distinct sets of launched exploits.
    """
    started = time.perf_counter()
    stats: dict = {"mode": "optimal", "expansions": 0, "states": 0}
    if gt.unreachable_goals:
        return _unsolvable(stats)
    P = gt.n_atoms
    actions = gt.actions
    zero = np.array([a.id for a in actions if a.cost == 0], dtype=np.int64)
    positive = np.array([a.id for a in actions if a.cost > 0], dtype=np.int64)
    goal = np.array(gt.goal, dtype=np.int64)

    def closure(mask: np.ndarray) -> tuple[np.ndarray, list[int]]:
        applied: list[int] = []
        while len(zero):
            app = zero[mask[gt.pre[zero]].all(axis=1)]
            new = [int(a) for a in app if not mask[list(actions[a].add)].all()]
            if not new:
                break
            for a in new:
                applied.append(a)
                mask[list(actions[a].add)] = True
        return mask, applied

    root = np.zeros(P + 1, dtype=bool)
    root[P] = True
    root, first = closure(root)
    key = np.packbits(root).tobytes()
    best = {key: 0.0}
    parents: dict[bytes, tuple[bytes | None, list[int]]] = {key: (None, first)}
    masks = {key: root}
    seq = itertools.count()
    heap = [(0.0, next(seq), key)]
    done: set[bytes] = set()
    while heap:
        g, _, key = heapq.heappop(heap)
        if key in done or g > best[key]:
            continue
        done.add(key)
        mask = masks.pop(key)
        stats["expansions"] += 1
        budget.check(len(best), started, stats)
        if mask[goal].all():
            path: list[int] = []
            k: bytes | None = key
            while k is not None:
                pk, acts = parents[k]
                path = acts + path
                k = pk
            stats["states"] = len(best)
            stats["search_seconds"] = time.perf_counter() - started
            return _finish(gt, path, stats, validate)
        if not len(positive):
            continue
        app = positive[mask[gt.pre[positive]].all(axis=1)]
        for a in app:
            a = int(a)
            add = list(actions[a].add)
            if mask[add].all():
                continue
            child = mask.copy()
            child[add] = True
            child, applied = closure(child)
            ck = np.packbits(child).tobytes()
            cg = g + actions[a].cost
            if ck in done or cg >= best.get(ck, math.inf):
                continue
            best[ck] = cg
            parents[ck] = (key, [a] + applied)
            masks[ck] = child
            heapq.heappush(heap, (cg, next(seq), ck))
    stats["states"] = len(best)
    stats["search_seconds"] = time.perf_counter() - started
    return _unsolvable(stats)


def search(gt: GroundTask, mode: str = "greedy", budget: Budget | None = None, validate: bool = True) -> SearchResult:
    if mode == "greedy":
        return greedy_search(gt, budget or Budget(), validate=validate)
    if mode == "optimal":
        return optimal_search(gt, budget or Budget(max_nodes=100_000), validate=validate)
    raise ValueError(f"unknown search mode {mode!r}")
