"""Replay a plan against a ground-truth network.

The replay checks every step against what is really true in the network,
not against the attacker's workspace, so plans built from wrong workspace
claims fail at the first step that depends on one.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

from .exploitdb import VARIANT_SUFFIX, Catalog, ExploitTemplate
from .naming import NameTable
from .netmodel import FINGERPRINT_FIELDS, PrivilegeLevel, Workspace
from .planner.search import Plan, PlanStep, format_number
from .scenario import GroundTruthNetwork
from .transform import Goal

SUCCESS = "success"
FAILED = "failed"

# failure reasons
NOT_COMPROMISED = "not-compromised"
NO_CONNECTIVITY = "no-connectivity"
PORT_CLOSED = "port-closed"
FINGERPRINT_MISMATCH = "fingerprint-mismatch"
SERVICE_MISSING = "service-missing"
NO_AGENT = "no-agent"
EXPLOIT_FAILED = "exploit-failed"
GOAL_NOT_REACHED = "goal-not-reached"


class MalformedPlanError(ValueError):
    """The plan names an action, host or argument the executor cannot resolve."""


@dataclass
class StepRecord:
    index: int
    action: str
    args: list[str]
    ok: bool
    reason: str | None
    added: list[str]
    time: float


@dataclass
class ExecutionTrace:
    steps: list[StepRecord] = field(default_factory=list)
    status: str = SUCCESS
    failed_step: int | None = None
    reason: str | None = None
    total_time: float = 0.0

    @property
    def succeeded(self) -> bool:
        return self.status == SUCCESS

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def format_log(self) -> str:
        lines = []
        for r in self.steps:
            mark = "ok  " if r.ok else "FAIL"
            extra = f" ({r.reason})" if r.reason else ""
            lines.append(f"[{mark}] t={format_number(r.time)} {r.index}: {r.action} {' '.join(r.args)}{extra}")
        if self.succeeded:
            lines.append(f"execution: success, time {format_number(self.total_time)}")
        else:
            lines.append(f"execution: failed at step {self.failed_step}: {self.reason}")
        return "\n".join(lines) + "\n"


@dataclass
class _SimState:
    agents: set[tuple[str, PrivilegeLevel]]
    compromised: set[str] = field(default_factory=set)
    ip: set[tuple[str, str]] = field(default_factory=set)
    conn: set[tuple[str, str, str, int]] = field(default_factory=set)  # proto, s, t, port


def _privilege(name: str) -> PrivilegeLevel:
    try:
        return PrivilegeLevel(name)
    except ValueError:
        raise MalformedPlanError(f"unknown privilege {name!r}") from None


def execute_plan(
    plan: Plan | Iterable[PlanStep],
    gt: GroundTruthNetwork,
    catalog: Catalog | Iterable[ExploitTemplate],
    goal: Goal,
    names: NameTable,
    outcome: Callable[[PlanStep, ExploitTemplate], bool] | None = None,
) -> ExecutionTrace:
    """Replay ``plan`` (PDDL names, resolved through ``names``) on ``gt``.

    ``outcome`` is an optional hook deciding whether an exploit whose
    requirements all hold actually succeeds; without it every such exploit
    succeeds.
    """
    steps = list(plan.steps if isinstance(plan, Plan) else plan)
    by_pddl = {e.pddl_id: e for e in catalog}
    # the attacker's own machine is under control before any step runs
    sim = _SimState(agents={(gt.attacker_host, PrivilegeLevel.HIGH)}, compromised={gt.attacker_host})
    trace = ExecutionTrace()

    def host(arg: str) -> str:
        entry = names.lookup(arg)
        if entry is None or entry[0] != "host" or entry[1] not in gt.hosts:
            raise MalformedPlanError(f"unknown host {arg!r}")
        return entry[1]

    def port(arg: str) -> int:
        entry = names.lookup(arg)
        if entry is None or entry[0] != "port":
            raise MalformedPlanError(f"unknown port {arg!r}")
        return int(entry[1])

    def arity(step: PlanStep, n: int) -> None:
        if len(step.args) != n:
            raise MalformedPlanError(f"{step.action} takes {n} arguments, got {len(step.args)}")

    for i, step in enumerate(steps):
        reason: str | None = None
        added: list[str] = []
        cost = 0.0
        name = step.action
        if name == "Mark_as_compromised":
            arity(step, 2)
            h, p = host(step.args[0]), _privilege(step.args[1])
            args = [h, p.value]
            if (h, p) not in sim.agents:
                reason = NO_AGENT
            else:
                sim.compromised.add(h)
                added.append(f"compromised {h}")
        elif name == "IP_connect":
            arity(step, 2)
            s, t = host(step.args[0]), host(step.args[1])
            args = [s, t]
            if s not in sim.compromised:
                reason = NOT_COMPROMISED
            elif not gt.can_reach(s, t):
                reason = NO_CONNECTIVITY
            else:
                sim.ip.add((s, t))
                added.append(f"IP_connectivity {s} {t}")
        elif name in ("TCP_connect", "UDP_connect"):
            arity(step, 3)
            proto = name[:3].lower()
            s, t, p = host(step.args[0]), host(step.args[1]), port(step.args[2])
            args = [s, t, str(p)]
            if s not in sim.compromised:
                reason = NOT_COMPROMISED
            elif (s, t) not in sim.ip:
                reason = NO_CONNECTIVITY
            elif p not in gt.hosts[t].ports(proto):
                reason = PORT_CLOSED
            else:
                sim.conn.add((proto, s, t, p))
                added.append(f"{proto.upper()}_connectivity {s} {t} {p}")
        else:
            m = VARIANT_SUFFIX.search(name)
            exploit = by_pddl.get(name[: m.start()]) if m else None
            if exploit is None:
                raise MalformedPlanError(f"unknown action {name!r}")
            k = int(m.group()[3:]) - 1
            if not 0 <= k < len(exploit.variants):
                raise MalformedPlanError(f"{name}: exploit {exploit.id} has no variant {k + 1}")
            variant = exploit.variants[k]
            if exploit.kind == "remote":
                arity(step, 2)
                s, t = host(step.args[0]), host(step.args[1])
                args = [s, t]
                target = gt.hosts[t]
                if s not in sim.compromised:
                    reason = NOT_COMPROMISED
                elif (exploit.protocol, s, t, exploit.required_port) not in sim.conn:
                    reason = NO_CONNECTIVITY
            else:
                arity(step, 1)
                t = host(step.args[0])
                args = [t]
                target = gt.hosts[t]
                if (t, PrivilegeLevel.LOW) not in sim.agents:
                    reason = NO_AGENT
            if reason is None:
                if not target.fingerprint.satisfies(variant):
                    reason = FINGERPRINT_MISMATCH
                elif exploit.required_service is not None and exploit.required_service not in target.service_names():
                    reason = SERVICE_MISSING
                elif outcome is not None and not outcome(step, exploit):
                    reason = EXPLOIT_FAILED
            if reason is None:
                cost = float(exploit.avg_runtime)
                sim.agents.add((t, exploit.result_privilege))
                added.append(f"installed_agent {t} {exploit.result_privilege.value}")
            name = exploit.id
        if reason is None:
            trace.total_time += cost
        trace.steps.append(StepRecord(i, name, args, reason is None, reason, added, trace.total_time))
        if reason is not None:
            trace.status, trace.failed_step, trace.reason = FAILED, i, reason
            return trace

    for h, priv in goal.targets:
        if h not in gt.hosts:
            raise MalformedPlanError(f"unknown goal host {h!r}")
        held = (h, priv) in sim.agents if priv is not None else h in sim.compromised
        if not held:
            trace.status, trace.failed_step, trace.reason = FAILED, len(steps), GOAL_NOT_REACHED
            return trace
    return trace


# ---------------------------------------------------------------------------
# workspace vs ground truth


@dataclass(frozen=True)
class Discrepancy:
    kind: str
    subject: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind} {self.subject}: {self.detail}"


def diff_claims(ws: Workspace, gt: GroundTruthNetwork) -> list[Discrepancy]:
    """Every workspace fact that does not hold in ``gt``, one entry per fact."""
    out: list[Discrepancy] = []
    for hid in sorted(ws.hosts):
        h = ws.hosts[hid]
        real = gt.hosts.get(hid)
        if real is None:
            out.append(Discrepancy("host", hid, "not present in the network"))
            continue
        for f, value in h.fingerprint.items():
            if getattr(real.fingerprint, f) != value:
                out.append(Discrepancy(FINGERPRINT_FIELDS[f][1], hid, f"{f}={value}"))
        for proto in ("tcp", "udp"):
            for p in sorted(h.ports(proto) - real.ports(proto)):
                out.append(Discrepancy(f"{proto}_port", hid, str(p)))
        for s in sorted(h.service_names() - real.service_names()):
            out.append(Discrepancy("service", hid, s))
        for a in sorted(h.applications - real.applications):
            out.append(Discrepancy("application", hid, a))
        for net in sorted(ws.networks_of(hid) - gt.segments_of(hid)):
            out.append(Discrepancy("membership", hid, net))
    for a, b in sorted(ws.connectivity_hints):
        if not gt.can_reach(a, b):
            out.append(Discrepancy("connectivity", a, b))
    for hid, p in sorted(ws.compromised):
        if not (hid == gt.attacker_host and p == PrivilegeLevel.HIGH):
            out.append(Discrepancy("compromised", hid, p.value))
    return out
