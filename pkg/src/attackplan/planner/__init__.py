"""Parse, ground and solve the emitted attack-planning tasks."""

from __future__ import annotations

from .grounding import GroundAction, GroundTask, ground
from .heuristic import RelaxedPlan, RelaxedPlanHeuristic
from .pddl import (
    PddlError,
    PddlSemanticError,
    PddlSyntaxError,
    Task,
    UnsupportedConstruct,
    normalize_action,
    parse,
    parse_domain,
)
from .render import render_plan
from .search import (
    SOLVED,
    UNSOLVABLE,
    Budget,
    BudgetExceeded,
    Plan,
    PlanInvalid,
    PlanStep,
    SearchResult,
    greedy_search,
    optimal_search,
    search,
    validate_plan,
)


def solve(domain: str, problem: str, mode: str = "greedy", budget: Budget | None = None) -> tuple[GroundTask, SearchResult]:
    """Parse, ground and search in one call."""
    gt = ground(parse(domain, problem))
    return gt, search(gt, mode, budget)


__all__ = [
    "Budget",
    "BudgetExceeded",
    "GroundAction",
    "GroundTask",
    "PddlError",
    "PddlSemanticError",
    "PddlSyntaxError",
    "Plan",
    "PlanInvalid",
    "PlanStep",
    "RelaxedPlan",
    "RelaxedPlanHeuristic",
    "SOLVED",
    "SearchResult",
    "Task",
    "UNSOLVABLE",
    "UnsupportedConstruct",
    "greedy_search",
    "ground",
    "normalize_action",
    "optimal_search",
    "parse",
    "parse_domain",
    "render_plan",
    "search",
    "solve",
    "validate_plan",
]
