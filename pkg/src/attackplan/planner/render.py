"""Human-readable plan listing with original host and exploit names."""

from __future__ import annotations

from ..exploitdb import VARIANT_SUFFIX
from ..naming import NameTable
from .search import Plan, PlanStep, format_number

LOCAL_AGENT = "localagent"


def step_label(step: PlanStep, names: NameTable | None) -> str:
    """``<action> <args...>`` with de-sanitized names."""
    if names is None:
        return " ".join((step.action,) + step.args)
    action = step.action
    base = VARIANT_SUFFIX.sub("", action)
    if base != action:
        entry = names.lookup(base)
        if entry is not None and entry[0] == "exploit":
            action = entry[1]
    args = []
    for a in step.args:
        entry = names.lookup(a)
        # hosts and networks print with their original ids; ports and
        # privileges keep their PDDL spelling (port445, high_privileges)
        if entry is not None and entry[0] in ("host", "network"):
            args.append(entry[1])
        else:
            args.append(a)
    if (
        step.action == "Mark_as_compromised"
        and names.attacker is not None
        and step.args
        and names.lookup(step.args[0]) == ("host", names.attacker)
    ):
        return f"{step.action} {LOCAL_AGENT} {names.attacker}"
    return " ".join([action] + args)


def render_plan(plan: Plan | None, names: NameTable | None = None) -> str:
    """Numbered ``N: action args`` lines and a final ``total-time`` line."""
    lines = []
    if plan is not None:
        lines = [f"{i}: {step_label(s, names)}" for i, s in enumerate(plan.steps)]
        total = plan.total_cost
    else:
        total = 0
    lines.append(f"total-time: {format_number(total)}")
    return "\n".join(lines) + "\n"
