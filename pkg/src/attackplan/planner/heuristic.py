"""Relaxed-plan heuristic over a :class:`GroundTask`.

Atom costs are additive (h_add), propagated to a fixpoint with synchronous
vectorized Bellman-Ford updates. A relaxed plan is then extracted backwards
from the goal using cost-tight best supporters; a second propagation over
the tight supporters assigns each atom a level so that supporter choice is
acyclic even when zero-cost actions tie.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grounding import GroundTask

_EPS = 1e-9


@dataclass(frozen=True)
class RelaxedPlan:
    cost: float
    actions: tuple[int, ...]
    helpful: tuple[int, ...]

    @property
    def length(self) -> int:
        return len(self.actions)

    @property
    def key(self) -> tuple[float, int]:
        return (self.cost, self.length)

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.cost)

    @property
    def is_zero(self) -> bool:
        return not self.actions and not self.is_infinite


INFINITE = RelaxedPlan(math.inf, (), ())


class RelaxedPlanHeuristic:
    def __init__(self, task: GroundTask):
        self.task = task
        self.P = task.n_atoms
        self.goal = np.array(task.goal, dtype=np.int64)
        self.evaluations = 0

    def mask(self, state) -> np.ndarray:
        m = np.zeros(self.P + 1, dtype=bool)
        if state:
            m[np.fromiter(state, dtype=np.int64, count=len(state))] = True
        m[self.P] = True
        return m

    def atom_costs(self, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """h_add atom costs and the matching action costs, at the fixpoint."""
        t = self.task
        ac = np.where(mask, 0.0, np.inf)
        if not len(t.actions):
            return ac, np.zeros(0)
        open_atoms = ~mask[t.achieved_atoms]
        targets = t.achieved_atoms[open_atoms]
        while True:
            act = t.cost + ac[t.pre].sum(axis=1)
            best = np.minimum.reduceat(act[t.add_act], t.achiever_starts)[open_atoms]
            improved = best < ac[targets]
            if not improved.any():
                return ac, act
            ac[targets[improved]] = best[improved]

    def levels(self, mask: np.ndarray, ac: np.ndarray, act: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Least support depth using only cost-tight achievers."""
        t = self.task
        lev = np.where(mask, 0.0, np.inf)
        if not len(t.actions):
            return lev, np.zeros(0)
        tight = act[t.add_act] <= ac[t.add_atom] + _EPS
        open_atoms = ~mask[t.achieved_atoms]
        targets = t.achieved_atoms[open_atoms]
        while True:
            alev = 1.0 + lev[t.pre].max(axis=1)
            cand = np.where(tight, alev[t.add_act], np.inf)
            best = np.minimum.reduceat(cand, t.achiever_starts)[open_atoms]
            improved = best < lev[targets]
            if not improved.any():
                return lev, alev
            lev[targets[improved]] = best[improved]

    def __call__(self, state) -> RelaxedPlan:
        return self.evaluate(self.mask(state))

    def evaluate(self, mask: np.ndarray) -> RelaxedPlan:
        self.evaluations += 1
        t = self.task
        if mask[self.goal].all():
            return RelaxedPlan(0.0, (), ())
        ac, act = self.atom_costs(mask)
        if np.isinf(ac[self.goal]).any():
            return INFINITE
        lev, alev = self.levels(mask, ac, act)

        chosen: dict[int, None] = {}
        done = set()
        stack = [int(g) for g in self.goal[::-1] if not mask[g]]
        while stack:
            x = stack.pop()
            if x in done:
                continue
            done.add(x)
            achs = t.achievers(x)
            ok = (act[achs] <= ac[x] + _EPS) & (alev[achs] == lev[x])
            a = int(achs[np.argmax(ok)])
            if a in chosen:
                continue
            chosen[a] = None
            for y in t.actions[a].pre:
                if not mask[y] and y not in done:
                    stack.append(y)
        acts = tuple(sorted(chosen))
        cost = float(sum(t.actions[a].cost for a in acts))
        helpful = tuple(a for a in acts if mask[list(t.actions[a].pre)].all())
        return RelaxedPlan(cost, acts, helpful)
