"""Type-aware grounding of a parsed task into a propositional delete-free task.

Grounding is a semi-naive reachability fixpoint. Atoms are processed in FIFO
order; when an atom is processed, every schema precondition it can match
triggers a join against already processed atoms (fluent predicates) and the
initial state (static predicates). An assignment is therefore found exactly
once: when the last of its fluent precondition atoms is processed.

Existential variables are grounded like parameters, giving one ground action
per witness; identical ground actions are merged afterwards.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .pddl import ActionSchema, Atom, Task

GAtom = tuple  # (predicate, arg, ...)


@dataclass(frozen=True)
class GroundAction:
    id: int
    name: str
    args: tuple[str, ...]
    pre: tuple[int, ...]
    add: tuple[int, ...]
    cost: float

    def __str__(self) -> str:
        return f"({' '.join((self.name,) + self.args)})"


@dataclass
class GroundTask:
    """Propositional task over atoms that are false initially.

    Atoms true in the initial state are compiled away: they never appear in
    preconditions, so the initial search state is the empty set. ``goal``
    lists the goal atoms still to be achieved. ``unreachable_goals`` holds
    goal atoms no action can ever add.
    """

    task: Task
    atoms: list[GAtom]
    actions: list[GroundAction]
    goal: tuple[int, ...]
    unreachable_goals: tuple[GAtom, ...]
    stats: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.atom_index = {a: i for i, a in enumerate(self.atoms)}
        self._build_arrays()

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def solvable_in_principle(self) -> bool:
        return not self.unreachable_goals

    def _build_arrays(self) -> None:
        P, A = len(self.atoms), len(self.actions)
        K = max([len(a.pre) for a in self.actions] + [1])
        pre = np.full((A, K), P, dtype=np.int32)  # P is an always-true padding atom
        for a in self.actions:
            pre[a.id, : len(a.pre)] = a.pre
        self.pre = pre
        self.cost = np.array([a.cost for a in self.actions], dtype=np.float64)
        pairs = sorted((x, a.id) for a in self.actions for x in a.add)
        self.add_atom = np.array([x for x, _ in pairs], dtype=np.int64)
        self.add_act = np.array([a for _, a in pairs], dtype=np.int64)
        counts = np.bincount(self.add_atom, minlength=P) if pairs else np.zeros(P, dtype=np.int64)
        self.achiever_ptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        self.achieved_atoms = np.flatnonzero(counts)
        self.achiever_starts = self.achiever_ptr[self.achieved_atoms]

    def achievers(self, atom: int) -> np.ndarray:
        return self.add_act[self.achiever_ptr[atom] : self.achiever_ptr[atom + 1]]


# ---------------------------------------------------------------------------
# schema compilation


@dataclass
class _Step:
    """One join step: look up or check ``atom`` given the variables bound so far."""

    pred: str
    fluent: bool
    terms: tuple  # ("v", idx) or ("c", const) per position
    lookup_pos: int | None  # bound position used for an index lookup, None = fully bound or scan
    binds: tuple[tuple[int, int], ...]  # (position, var) bound by this step
    checks: tuple[tuple[int, int], ...]  # (position, var) already bound, to compare
    not_trigger: bool = False  # ground atom must differ from the trigger atom


@dataclass
class _Compiled:
    index: int
    schema: ActionSchema
    variables: list[tuple[str, str]]
    n_params: int
    has_exists: bool
    domains: list[set[str]]
    fluent: list[Atom]  # atoms with renamed variables
    static: list[Atom]
    add: list[Atom]
    dead: bool = False


def _var_terms(atom: Atom, var_ix: dict[str, int]) -> tuple:
    return tuple(("v", var_ix[a]) if a.startswith("?") else ("c", a) for a in atom[1])


class _StaticIndex:
    def __init__(self, atoms):
        self.atoms = set(atoms)
        self.by_pos: dict[tuple, list[GAtom]] = {}
        self.by_pred: dict[str, list[GAtom]] = {}
        for a in sorted(self.atoms):
            self.by_pred.setdefault(a[0], []).append(a)
            for p, v in enumerate(a[1:]):
                self.by_pos.setdefault((a[0], p, v), []).append(a)


def _compile(task: Task, index: int, schema: ActionSchema, fluent_preds: set[str], static: _StaticIndex) -> _Compiled:
    variables = list(schema.parameters)
    ren: dict[str, str] = {}
    for k, e in enumerate(schema.exists):
        for v, t in e.variables:
            new = f"{v}#{k}"
            ren[v] = new
            variables.append((new, t))
    var_ix = {v: i for i, (v, _) in enumerate(variables)}

    def rename(atom: Atom, local: dict[str, str]) -> Atom:
        return atom[0], tuple(local.get(a, a) for a in atom[1])

    pre: list[Atom] = list(schema.precondition)
    for k, e in enumerate(schema.exists):
        local = {v: f"{v}#{k}" for v, _ in e.variables}
        pre.extend(rename(a, local) for a in e.atoms)

    comp = _Compiled(
        index, schema, variables, len(schema.parameters), bool(schema.exists),
        [set(task.objects_of_type(t)) for _, t in variables], [], [], list(schema.add),
    )
    for atom in pre:
        if atom[0] in fluent_preds:
            comp.fluent.append(atom)
            continue
        vs = {a for a in atom[1] if a.startswith("?")}
        if not vs:
            if (atom[0],) + atom[1] not in static.atoms:
                comp.dead = True
        elif len(vs) == 1:
            (v,) = vs
            allowed = set()
            for g in static.by_pred.get(atom[0], ()):
                val = None
                ok = True
                for a, x in zip(atom[1], g[1:]):
                    if a == v:
                        if val is None:
                            val = x
                        elif val != x:
                            ok = False
                    elif a != x:
                        ok = False
                if ok:
                    allowed.add(val)
            comp.domains[var_ix[v]] &= allowed
        else:
            comp.static.append(atom)
    if any(not d for d in comp.domains):
        comp.dead = True
    comp.var_ix = var_ix
    return comp


def _plan_join(comp: _Compiled, trigger: int | None) -> tuple[list[_Step], list[int]]:
    """Static join order after the trigger atom (fluent index) is bound."""
    var_ix = comp.var_ix
    bound: set[int] = set()
    if trigger is not None:
        bound |= {ix for kind, ix in _var_terms(comp.fluent[trigger], var_ix) if kind == "v"}
    pending = [(True, j, a) for j, a in enumerate(comp.fluent) if j != trigger]
    pending += [(False, -1, a) for a in comp.static]
    steps: list[_Step] = []
    while pending:
        def score(item):
            terms = _var_terms(item[2], var_ix)
            n_bound = sum(1 for k, x in terms if k == "c" or x in bound)
            return (-(n_bound == len(terms)), -n_bound, not item[0])

        pending.sort(key=score)
        fluent, j, atom = pending.pop(0)
        terms = _var_terms(atom, var_ix)
        lookup = None
        binds, checks = [], []
        seen_here: set[int] = set()
        for p, (kind, x) in enumerate(terms):
            if kind == "c":
                if lookup is None:
                    lookup = p
            elif x in bound:
                checks.append((p, x))
                if lookup is None or terms[lookup][0] == "c":
                    lookup = p
            elif x in seen_here:
                checks.append((p, x))
            else:
                binds.append((p, x))
                seen_here.add(x)
        if not binds:
            lookup = None
        steps.append(_Step(atom[0], fluent, terms, lookup, tuple(binds), tuple(checks),
                           fluent and trigger is not None and j < trigger))
        bound |= seen_here
    free = [i for i in range(len(comp.variables)) if i not in bound]
    return steps, free


# ---------------------------------------------------------------------------
# the fixpoint


def ground(task: Task, relevance: bool = True) -> GroundTask:
    t0 = time.perf_counter()
    schemas = task.domain.actions
    fluent_preds = {a[0] for s in schemas for a in s.add}
    init = {(p,) + args for p, args in task.problem.init}
    static = _StaticIndex(a for a in init if a[0] not in fluent_preds)

    compiled = [_compile(task, i, s, fluent_preds, static) for i, s in enumerate(schemas)]
    live = [c for c in compiled if not c.dead]

    # trigger index: (pred, ((pos, const), ...)) -> [(schemas, binds, steps, free)]
    # When the trigger binds every variable, the join can only check atoms,
    # so schemas with the same lifted structure produce the same ground
    # action and differ only in variable domains and cost. They share one
    # entry, sorted by cost, and only the first one whose domains accept
    # the binding is emitted (the others would be dominated).
    triggers: dict[tuple, list] = {}
    groups: dict[tuple, list] = {}
    patterns: dict[str, list[tuple[int, ...]]] = {}
    for c in live:
        for i, atom in enumerate(c.fluent):
            consts = tuple((p, a) for p, a in enumerate(atom[1]) if not a.startswith("?"))
            pat = tuple(p for p, _ in consts)
            if pat not in patterns.setdefault(atom[0], []):
                patterns[atom[0]].append(pat)
            steps, free = _plan_join(c, i)
            binds = tuple((p, ix) for p, (k, ix) in enumerate(_var_terms(atom, c.var_ix)) if k == "v")
            entry = ([c], binds, steps, free)
            if not free and not any(st.binds for st in steps) and not c.has_exists:
                shape = (
                    atom[0], consts, i, binds, c.n_params, len(c.variables),
                    tuple((a[0], _var_terms(a, c.var_ix)) for a in c.fluent),
                    tuple((a[0], _var_terms(a, c.var_ix)) for a in c.add),
                    tuple((a[0], _var_terms(a, c.var_ix)) for a in c.static),
                )
                if shape in groups:
                    groups[shape][0].append(c)
                    continue
                groups[shape] = entry
            triggers.setdefault((atom[0], consts), []).append(entry)
    for members, *_ in groups.values():
        members.sort(key=lambda c: (c.schema.cost, c.index))

    atom_id: dict[GAtom, int] = {}
    atoms: list[GAtom] = []
    queue: list[GAtom] = []

    def reach(a: GAtom) -> int:
        ix = atom_id.get(a)
        if ix is None:
            ix = atom_id[a] = len(atoms)
            atoms.append(a)
            queue.append(a)
        return ix

    for a in sorted(x for x in init if x[0] in fluent_preds):
        reach(a)
    init_ids = set(range(len(atoms)))

    processed: set[GAtom] = set()
    p_index: dict[tuple, list[GAtom]] = {}
    best: dict[tuple, list] = {}  # (pre, add) -> [cost, schema index, args]
    seen_exists: set[tuple] = set()
    raw = 0

    def emit(c: _Compiled, vals: list) -> None:
        nonlocal raw
        pre = []
        for atom in c.fluent:
            g = (atom[0],) + tuple(vals[c.var_ix[a]] if a.startswith("?") else a for a in atom[1])
            ix = atom_id[g]
            if ix not in init_ids:
                pre.append(ix)
        args = tuple(vals[: c.n_params])
        if c.has_exists:
            key = (c.index, args, tuple(pre))
            if key in seen_exists:
                return
            seen_exists.add(key)
        raw += 1
        add = []
        for atom in c.add:
            g = (atom[0],) + tuple(vals[c.var_ix[a]] if a.startswith("?") else a for a in atom[1])
            ix = reach(g)
            if ix not in init_ids:
                add.append(ix)
        if not add:
            return
        key = (tuple(sorted(set(pre))), tuple(sorted(set(add))))
        cur = best.get(key)
        if cur is None:
            best[key] = [c.schema.cost, c.index, args]
        elif c.schema.cost < cur[0]:
            cur[0], cur[1], cur[2] = c.schema.cost, c.index, args

    def join(c: _Compiled, steps: list[_Step], k: int, vals: list, free: list[int], trig: GAtom | None) -> None:
        if k == len(steps):
            if not free:
                emit(c, vals)
                return
            for combo in itertools.product(*(sorted(c.domains[v]) for v in free)):
                for v, x in zip(free, combo):
                    vals[v] = x
                emit(c, vals)
            for v in free:
                vals[v] = None
            return
        st = steps[k]
        if not st.binds:
            g = (st.pred,) + tuple(vals[x] if kind == "v" else x for kind, x in st.terms)
            if (g in processed) if st.fluent else (g in static.atoms):
                if not (st.not_trigger and g == trig):
                    join(c, steps, k + 1, vals, free, trig)
            return
        if st.lookup_pos is None:
            cands = p_index.get((st.pred,), ()) if st.fluent else static.by_pred.get(st.pred, ())
        else:
            kind, x = st.terms[st.lookup_pos]
            key = (st.pred, st.lookup_pos, vals[x] if kind == "v" else x)
            cands = p_index.get(key, ()) if st.fluent else static.by_pos.get(key, ())
        for g in list(cands):
            ok = True
            for p, (kind, x) in enumerate(st.terms):
                if kind == "c" and g[p + 1] != x:
                    ok = False
                    break
            if not ok:
                continue
            for p, v in st.checks:
                if vals[v] is not None and g[p + 1] != vals[v]:
                    ok = False
                    break
            if not ok:
                continue
            set_here = []
            for p, v in st.binds:
                val = g[p + 1]
                if vals[v] is None:
                    if val not in c.domains[v]:
                        ok = False
                        break
                    vals[v] = val
                    set_here.append(v)
                elif vals[v] != val:
                    ok = False
                    break
            if ok and all(vals[v] == g[p + 1] for p, v in st.checks):
                if not (st.not_trigger and g == trig):
                    join(c, steps, k + 1, vals, free, trig)
            for v in set_here:
                vals[v] = None

    for c in live:
        if not c.fluent:
            steps, free = _plan_join(c, None)
            join(c, steps, 0, [None] * len(c.variables), free, None)

    head = 0
    while head < len(queue):
        a = queue[head]
        head += 1
        processed.add(a)
        p_index.setdefault((a[0],), []).append(a)
        for p, v in enumerate(a[1:]):
            p_index.setdefault((a[0], p, v), []).append(a)
        for pat in patterns.get(a[0], ()):
            key = (a[0], tuple((p, a[p + 1]) for p in pat))
            for members, binds, steps, free in triggers.get(key, ()):
                for c in members:
                    vals = [None] * len(c.variables)
                    ok = True
                    for p, v in binds:
                        val = a[p + 1]
                        if vals[v] is None:
                            if val not in c.domains[v]:
                                ok = False
                                break
                            vals[v] = val
                        elif vals[v] != val:
                            ok = False
                            break
                    if ok:
                        join(c, steps, 0, vals, free, a)
                        break

    t1 = time.perf_counter()
    goal = [(p,) + args for p, args in task.problem.goal]
    open_goal = [g for g in goal if g not in init]
    unreachable = tuple(g for g in open_goal if g not in atom_id)

    entries = [(pre, add, cost, si, args) for (pre, add), (cost, si, args) in best.items()]
    stats = {
        "schemas": len(schemas),
        "live_schemas": len(live),
        "reachable_atoms": len(atoms),
        "raw_actions": raw,
        "actions_after_dominance": len(entries),
    }
    goal_ids = [atom_id[g] for g in open_goal if g in atom_id]
    if relevance:
        entries = _relevant(entries, goal_ids, len(atoms))
    stats["actions"] = len(entries)

    # re-intern: relevant atoms in first-use order, goal atoms always present
    new_id: dict[int, int] = {}
    out_atoms: list[GAtom] = []

    def nid(x: int) -> int:
        if x not in new_id:
            new_id[x] = len(out_atoms)
            out_atoms.append(atoms[x])
        return new_id[x]

    for g in goal_ids:
        nid(g)
    relevant_atoms = None
    if relevance:
        relevant_atoms = set(goal_ids)
        for pre, _, _, _, _ in entries:
            relevant_atoms.update(pre)
    actions = []
    for pre, add, cost, si, args in entries:
        kept = [x for x in add if relevant_atoms is None or x in relevant_atoms]
        actions.append(
            GroundAction(len(actions), schemas[si].name, args, tuple(nid(x) for x in pre),
                         tuple(nid(x) for x in kept), float(cost))
        )
    stats["atoms"] = len(out_atoms)
    stats["ground_seconds"] = time.perf_counter() - t0
    stats["fixpoint_seconds"] = t1 - t0
    return GroundTask(task, out_atoms, actions, tuple(new_id[g] for g in goal_ids), unreachable, stats)


def _relevant(entries: list, goal_ids: list[int], n_atoms: int) -> list:
    """Keep actions that can contribute to the goal (backward reachability)."""
    achievers: dict[int, list[int]] = {}
    for i, (_, add, _, _, _) in enumerate(entries):
        for x in add:
            achievers.setdefault(x, []).append(i)
    needed = set(goal_ids)
    stack = list(goal_ids)
    keep: set[int] = set()
    while stack:
        x = stack.pop()
        for i in achievers.get(x, ()):
            if i in keep:
                continue
            keep.add(i)
            for y in entries[i][0]:
                if y not in needed:
                    needed.add(y)
                    stack.append(y)
    return [e for i, e in enumerate(entries) if i in keep]
