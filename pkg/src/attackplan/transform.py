"""Emit ``domain.pddl`` and ``problem.pddl`` from a workspace and a catalog."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .exploitdb import ActionTemplate, Catalog, Const, LiftedAtom, expand_variants
from .naming import NameTable, is_identifier, sanitize
from .netmodel import FINGERPRINT_FIELDS, VOCABULARY_KINDS, PrivilegeLevel, Workspace

__all__ = [
    "DOMAIN_NAME",
    "Goal",
    "TransformOptions",
    "TransformResult",
    "UnregisteredConstantError",
    "build_name_table",
    "emit_domain",
    "emit_problem",
    "merged_vocabularies",
    "sanitize",
    "transform",
]

DOMAIN_NAME = "attack-planning"
PROBLEM_NAME = "attack-scenario"

TYPES = (
    "network",
    "host",
    "port",
    "port_set",
    "application",
    "agent",
    "privileges",
    "operating_system",
    "OS_version",
    "OS_edition",
    "OS_build",
    "OS_servicepack",
    "OS_distro",
    "kernel_version",
    "OS_architecture",
)

PREDICATES = (
    ("connected_to_network", (("?s", "host"), ("?n", "network"))),
    ("IP_connectivity", (("?s", "host"), ("?t", "host"))),
    ("TCP_connectivity", (("?s", "host"), ("?t", "host"), ("?p", "port"))),
    ("UDP_connectivity", (("?s", "host"), ("?t", "host"), ("?p", "port"))),
    ("TCP_listen_port", (("?h", "host"), ("?p", "port"))),
    ("UDP_listen_port", (("?h", "host"), ("?p", "port"))),
    ("has_OS", (("?h", "host"), ("?os", "operating_system"))),
    ("has_OS_version", (("?h", "host"), ("?osv", "OS_version"))),
    ("has_OS_edition", (("?h", "host"), ("?ose", "OS_edition"))),
    ("has_OS_build", (("?h", "host"), ("?osb", "OS_build"))),
    ("has_OS_servicepack", (("?h", "host"), ("?ossp", "OS_servicepack"))),
    ("has_OS_distro", (("?h", "host"), ("?osd", "OS_distro"))),
    ("has_kernel_version", (("?h", "host"), ("?kv", "kernel_version"))),
    ("has_architecture", (("?h", "host"), ("?a", "OS_architecture"))),
    ("has_application", (("?h", "host"), ("?p", "application"))),
    ("has_service", (("?h", "host"), ("?s", "application"))),
    ("compromised", (("?h", "host"),)),
    ("installed_agent", (("?h", "host"), ("?p", "privileges"))),
)

LOCAL_AGENT = "localagent"


class UnregisteredConstantError(ValueError):
    pass


@dataclass(frozen=True)
class TransformOptions:
    sanitize_identifiers: bool = True
    emit_udp_connect: bool = True
    metric_name: str = "time"

    def __post_init__(self) -> None:
        if not is_identifier(self.metric_name):
            raise ValueError(f"metric name {self.metric_name!r} is not a legal PDDL identifier")


@dataclass(frozen=True)
class Goal:
    """Hosts to compromise; a privilege pins the required agent level."""

    targets: tuple[tuple[str, PrivilegeLevel | None], ...]

    def __post_init__(self) -> None:
        if not self.targets:
            raise ValueError("a goal needs at least one target")

    @classmethod
    def compromise(cls, *hosts: str) -> "Goal":
        return cls(tuple((h, None) for h in hosts))

    @classmethod
    def parse(cls, specs: Iterable[str]) -> "Goal":
        """Build from ``host`` or ``host:privilege`` strings (CLI syntax)."""
        targets = []
        for spec in specs:
            host, sep, priv = spec.rpartition(":")
            if sep and priv in {p.value for p in PrivilegeLevel}:
                targets.append((host, PrivilegeLevel(priv)))
            else:
                targets.append((spec, None))
        return cls(tuple(targets))

    def hosts(self) -> list[str]:
        return [h for h, _ in self.targets]


@dataclass
class TransformResult:
    domain: str
    problem: str
    names: NameTable = field(repr=False)

    @property
    def mapping(self) -> str:
        return self.names.to_tsv()


# ---------------------------------------------------------------------------
# names


def merged_vocabularies(ws: Workspace | None, catalog: Iterable | None) -> dict[str, set]:
    """Workspace vocabularies plus every constant the catalog references."""
    vocab: dict[str, set] = {k: set() for k in VOCABULARY_KINDS}
    if ws is not None:
        for k, values in ws.vocabularies.items():
            vocab[k] |= set(values)
    if catalog is not None:
        for t in expand_variants(catalog):
            for c in t.constants():
                if c.kind in vocab:
                    vocab[c.kind].add(c.value)
    return vocab


def _sorted_values(values: Iterable) -> list:
    return sorted(values, key=lambda v: (isinstance(v, str), v if isinstance(v, str) else int(v)))


def build_name_table(
    vocabularies: Mapping[str, Iterable],
    ws: Workspace | None = None,
    catalog: Iterable | None = None,
    opts: TransformOptions = TransformOptions(),
) -> NameTable:
    """Deterministic name table: constants first, then networks and hosts.

    Constants are inserted before anything workspace-specific, so a domain
    emitted alone gets the same constant names as one emitted alongside a
    problem.
    """
    names = NameTable(opts.sanitize_identifiers)
    for p in PrivilegeLevel:
        names.assign("privileges", p.value, name=p.value)
    names.assign("agent", LOCAL_AGENT, name=LOCAL_AGENT)
    for kind in VOCABULARY_KINDS:
        for value in _sorted_values(vocabularies.get(kind, ())):
            names.assign(kind, value, prefix="c")
    if catalog is not None:
        for e in catalog:
            names.assign("exploit", e.id, name=e.pddl_id)
    if ws is not None:
        for net in sorted(ws.networks):
            names.assign("network", net, prefix="n")
        if ws.attacker_host in ws.hosts:
            names.assign("host", ws.attacker_host, prefix="h")
            names.attacker = ws.attacker_host
        for h in sorted(ws.hosts):
            names.assign("host", h, prefix="h")
    return names


def _const_name(names: NameTable, c: Const) -> str:
    got = names.get(c.kind, c.value)
    if got is None:
        raise UnregisteredConstantError(f"constant {c.value!r} of type {c.kind} is not in any vocabulary")
    return got


# ---------------------------------------------------------------------------
# domain

_MODEL_ACTIONS = """\
  (:action IP_connect
    :parameters (?s - host ?t - host)
    :precondition (and (compromised ?s)
      (exists (?n - network)
        (and (connected_to_network ?s ?n)
          (connected_to_network ?t ?n))))
    :effect (IP_connectivity ?s ?t))

  (:action TCP_connect
    :parameters (?s - host ?t - host ?p - port)
    :precondition (and (compromised ?s)
      (IP_connectivity ?s ?t)
      (TCP_listen_port ?t ?p))
    :effect (TCP_connectivity ?s ?t ?p))
"""

_UDP_CONNECT = """
  (:action UDP_connect
    :parameters (?s - host ?t - host ?p - port)
    :precondition (and (compromised ?s)
      (IP_connectivity ?s ?t)
      (UDP_listen_port ?t ?p))
    :effect (UDP_connectivity ?s ?t ?p))
"""

_MARK = """
  (:action Mark_as_compromised
    :parameters (?h - host ?p - privileges)
    :precondition (installed_agent ?h ?p)
    :effect (compromised ?h))
"""


def _fmt_number(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def _fmt_atom(atom: LiftedAtom, names: NameTable) -> str:
    pred, args = atom
    parts = [a if isinstance(a, str) else _const_name(names, a) for a in args]
    return f"({pred} {' '.join(parts)})"


def _emit_action(t: ActionTemplate, names: NameTable, metric: str) -> str:
    params = " ".join(f"{v} - {ty}" for v, ty in t.parameters)
    lines = [
        f"  (:action {t.name}",
        f"    :parameters ({params})",
    ]
    pre = [_fmt_atom(a, names) for a in t.precondition]
    fp = [_fmt_atom(a, names) for a in t.fingerprint_atoms]
    body = [pre[0]]
    if fp:
        inner = fp[0] + "".join(f"\n        {a}" for a in fp[1:])
        body.append(f"(and {inner})")
    body.extend(pre[1:])
    lines.append("    :precondition (and " + "\n      ".join(body) + ")")
    lines.append(f"    :effect (and {_fmt_atom(t.effect, names)}")
    lines.append(f"      (increase ({metric}) {_fmt_number(t.cost)})))")
    return "\n".join(lines) + "\n"


def emit_domain(
    catalog: Iterable,
    vocabularies: Mapping[str, Iterable],
    opts: TransformOptions = TransformOptions(),
    names: NameTable | None = None,
) -> str:
    """The attack domain: types, predicates, model actions, one action per
    exploit variant, and a trailing constant list."""
    catalog = list(catalog)
    if names is None:
        names = build_name_table(vocabularies, catalog=catalog, opts=opts)
    templates = expand_variants(catalog)
    for t in templates:
        for c in t.constants():
            _const_name(names, c)

    out = [f"(define (domain {DOMAIN_NAME})"]
    out.append("  (:requirements :typing :fluents :existential-preconditions)")
    out.append("  (:types " + " ".join(TYPES) + " - object)")
    out.append("  (:predicates")
    for pred, params in PREDICATES:
        out.append(f"    ({pred} " + " ".join(f"{v} - {ty}" for v, ty in params) + ")")
    out[-1] += ")"
    out.append(f"  (:functions ({opts.metric_name}))")
    out.append("")
    actions = _MODEL_ACTIONS
    if opts.emit_udp_connect:
        actions += _UDP_CONNECT
    actions += _MARK
    out.append(actions.rstrip("\n"))
    for t in templates:
        out.append("")
        out.append(_emit_action(t, names, opts.metric_name).rstrip("\n"))
    out.append("")
    out.append("  (:constants")
    by_type: dict[str, list[str]] = {}
    for kind, name, _ in names.entries():
        if kind in ("host", "network", "exploit"):
            continue
        by_type.setdefault(kind, []).append(name)
    for ty in TYPES:
        if ty in by_type:
            out.append("    " + " ".join(sorted(by_type[ty])) + f" - {ty}")
    out[-1] += ")"
    out.append(")")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# problem


def _init_atoms(ws: Workspace, names: NameTable) -> list[str]:
    H = lambda h: names.name("host", h)  # noqa: E731
    atoms: list[str] = []
    for h in sorted(ws.hosts):
        host = ws.hosts[h]
        for net in sorted(ws.networks_of(h)):
            atoms.append(f"(connected_to_network {H(h)} {names.name('network', net)})")
        for p in sorted(host.tcp_ports):
            atoms.append(f"(TCP_listen_port {H(h)} {names.name('port', p)})")
        for p in sorted(host.udp_ports):
            atoms.append(f"(UDP_listen_port {H(h)} {names.name('port', p)})")
        for f, value in host.fingerprint.items():
            kind, pred = FINGERPRINT_FIELDS[f]
            atoms.append(f"({pred} {H(h)} {names.name(kind, value)})")
        for svc in sorted(host.service_names()):
            atoms.append(f"(has_service {H(h)} {names.name('application', svc)})")
        for app in sorted(host.applications):
            atoms.append(f"(has_application {H(h)} {names.name('application', app)})")
    for h, p in sorted(ws.compromised):
        atoms.append(f"(installed_agent {H(h)} {p.value})")
    for a, b in sorted(ws.connectivity_hints):
        atoms.append(f"(IP_connectivity {H(a)} {H(b)})")
    return atoms


def goal_atoms(goal: Goal, names: NameTable) -> list[str]:
    out = []
    for h, priv in goal.targets:
        if priv is None:
            out.append(f"(compromised {names.name('host', h)})")
        else:
            out.append(f"(installed_agent {names.name('host', h)} {priv.value})")
    return out


def emit_problem(
    ws: Workspace,
    goal: Goal,
    opts: TransformOptions = TransformOptions(),
    names: NameTable | None = None,
) -> str:
    unknown = [h for h in goal.hosts() if h not in ws.hosts]
    if unknown:
        raise ValueError(f"unknown goal host(s): {unknown}")
    if names is None:
        names = build_name_table(ws.vocabularies, ws=ws, opts=opts)
    hosts = [names.name("host", h) for h in sorted(ws.hosts)]
    nets = [names.name("network", n) for n in sorted(ws.networks)]
    out = [f"(define (problem {PROBLEM_NAME})", f"  (:domain {DOMAIN_NAME})", "  (:objects"]
    out.append("    " + " ".join(hosts) + " - host")
    out.append("    " + " ".join(nets) + " - network)")
    out.append("  (:init")
    out.append(f"    (= ({opts.metric_name}) 0)")
    out.extend("    " + a for a in _init_atoms(ws, names))
    out[-1] += ")"
    out.append("  (:goal (and")
    out.extend("    " + a for a in goal_atoms(goal, names))
    out[-1] += "))"
    out.append(f"  (:metric minimize ({opts.metric_name}))")
    out.append(")")
    return "\n".join(out) + "\n"


def transform(
    ws: Workspace,
    catalog: Sequence | Catalog,
    goal: Goal,
    opts: TransformOptions = TransformOptions(),
) -> TransformResult:
    """Domain, problem and name table for one planning run."""
    vocab = merged_vocabularies(ws, catalog)
    names = build_name_table(vocab, ws=ws, catalog=catalog, opts=opts)
    domain = emit_domain(catalog, vocab, opts, names)
    problem = emit_problem(ws, goal, opts, names)
    return TransformResult(domain, problem, names)
