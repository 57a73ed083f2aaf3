"""Typed model of the attacker's workspace.

A :class:`Workspace` is what the transform reads: segments, hosts with OS
fingerprints, open ports and services, the attacker host and the set of
compromised hosts. The scenario generator writes the same structures.
"""

from __future__ import annotations

import copy
import enum
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import jsonschema

FORMAT_VERSION = 1

# fingerprint field -> (PDDL object type, PDDL predicate)
FINGERPRINT_FIELDS: dict[str, tuple[str, str]] = {
    "os": ("operating_system", "has_OS"),
    "version": ("OS_version", "has_OS_version"),
    "edition": ("OS_edition", "has_OS_edition"),
    "build": ("OS_build", "has_OS_build"),
    "servicepack": ("OS_servicepack", "has_OS_servicepack"),
    "distro": ("OS_distro", "has_OS_distro"),
    "kernel_version": ("kernel_version", "has_kernel_version"),
    "architecture": ("OS_architecture", "has_architecture"),
}

# Vocabularies are keyed by the PDDL type their values become constants of.
VOCABULARY_KINDS: tuple[str, ...] = tuple(t for t, _ in FINGERPRINT_FIELDS.values()) + (
    "application",
    "port",
)

PROTOCOLS = ("tcp", "udp")


class WorkspaceError(ValueError):
    """Raised when a mutation would break workspace integrity."""


class SchemaError(ValueError):
    """Raised when a workspace document does not match the schema."""

    def __init__(self, message: str, path: str = "", line: int | None = None):
        self.path = path
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if path:
            where.append(path)
        super().__init__(f"{': '.join(where)}: {message}" if where else message)


class PrivilegeLevel(str, enum.Enum):
    LOW = "low_privileges"
    HIGH = "high_privileges"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class OsFingerprint:
    """OS details of a host. ``None`` means unknown / unconstrained."""

    os: str | None = None
    version: str | None = None
    edition: str | None = None
    build: str | None = None
    servicepack: str | None = None
    distro: str | None = None
    kernel_version: str | None = None
    architecture: str | None = None

    def items(self) -> list[tuple[str, str]]:
        """Set fields as ``(field, value)`` pairs in canonical order."""
        return [(f, getattr(self, f)) for f in FINGERPRINT_FIELDS if getattr(self, f) is not None]

    def to_dict(self) -> dict[str, str]:
        return dict(self.items())

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "OsFingerprint":
        unknown = set(data) - set(FINGERPRINT_FIELDS)
        if unknown:
            raise ValueError(f"unknown fingerprint fields: {sorted(unknown)}")
        return cls(**{k: v for k, v in data.items() if v is not None})

    def satisfies(self, constraint: "OsFingerprint") -> bool:
        return fingerprint_satisfies(self, constraint)


def fingerprint_satisfies(f: OsFingerprint, c: OsFingerprint) -> bool:
    """True iff every field set in ``c`` is set in ``f`` with the same value."""
    for name, wanted in c.items():
        if getattr(f, name) != wanted:
            return False
    return True


@dataclass(frozen=True, order=True)
class ServiceBinding:
    name: str
    port: int
    protocol: str = "tcp"


@dataclass
class Host:
    id: str
    fingerprint: OsFingerprint = field(default_factory=OsFingerprint)
    tcp_ports: set[int] = field(default_factory=set)
    udp_ports: set[int] = field(default_factory=set)
    services: set[ServiceBinding] = field(default_factory=set)
    applications: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        if not self.id or any(c in self.id for c in "\t\n\r"):
            raise WorkspaceError(f"invalid host id {self.id!r}")
        self.tcp_ports = set(self.tcp_ports)
        self.udp_ports = set(self.udp_ports)
        self.services = set(self.services)
        self.applications = set(self.applications)
        for p in self.tcp_ports | self.udp_ports:
            if not isinstance(p, int) or isinstance(p, bool) or not 1 <= p <= 65535:
                raise WorkspaceError(f"host {self.id}: invalid port {p!r}")
        for b in self.services:
            if b.protocol not in PROTOCOLS:
                raise WorkspaceError(f"host {self.id}: unknown protocol {b.protocol!r}")
            if b.port not in self.ports(b.protocol):
                raise WorkspaceError(
                    f"host {self.id}: service {b.name} bound to {b.protocol}/{b.port}, which is not open"
                )

    def ports(self, protocol: str) -> set[int]:
        return self.tcp_ports if protocol == "tcp" else self.udp_ports

    def service_names(self) -> set[str]:
        return {b.name for b in self.services}

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "fingerprint": self.fingerprint.to_dict(),
            "tcp_ports": sorted(self.tcp_ports),
            "udp_ports": sorted(self.udp_ports),
            "services": [
                {"name": b.name, "port": b.port, "protocol": b.protocol} for b in sorted(self.services)
            ],
            "applications": sorted(self.applications),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Host":
        return cls(
            id=data["id"],
            fingerprint=OsFingerprint.from_dict(data.get("fingerprint", {})),
            tcp_ports=set(data.get("tcp_ports", ())),
            udp_ports=set(data.get("udp_ports", ())),
            services={ServiceBinding(s["name"], s["port"], s.get("protocol", "tcp")) for s in data.get("services", ())},
            applications=set(data.get("applications", ())),
        )


@dataclass
class NetworkSegment:
    id: str
    member_hosts: set[str] = field(default_factory=set)


def _empty_vocabularies() -> dict[str, set]:
    return {k: set() for k in VOCABULARY_KINDS}


@dataclass
class Workspace:
    attacker_host: str
    networks: dict[str, NetworkSegment] = field(default_factory=dict)
    hosts: dict[str, Host] = field(default_factory=dict)
    compromised: set[tuple[str, PrivilegeLevel]] = field(default_factory=set)
    connectivity_hints: set[tuple[str, str]] = field(default_factory=set)
    vocabularies: dict[str, set] = field(default_factory=_empty_vocabularies)

    def copy(self) -> "Workspace":
        return copy.deepcopy(self)

    def add_network(self, net_id: str) -> "Workspace":
        if net_id in self.networks:
            raise WorkspaceError(f"duplicate network id {net_id!r}")
        self.networks[net_id] = NetworkSegment(net_id)
        return self

    def add_host(self, host: Host, nets: Iterable[str]) -> "Workspace":
        return add_host(self, host, nets)

    def networks_of(self, host_id: str) -> set[str]:
        return {n.id for n in self.networks.values() if host_id in n.member_hosts}

    def register(self, kind: str, value: Any) -> None:
        if kind not in self.vocabularies:
            raise WorkspaceError(f"unknown vocabulary {kind!r}")
        self.vocabularies[kind].add(value)

    def register_host_values(self, host: Host) -> None:
        for name, value in host.fingerprint.items():
            self.register(FINGERPRINT_FIELDS[name][0], value)
        for p in host.tcp_ports | host.udp_ports:
            self.register("port", p)
        for b in host.services:
            self.register("application", b.name)
        for a in host.applications:
            self.register("application", a)

    def validate(self) -> None:
        """Check referential integrity; raises :class:`WorkspaceError`."""
        if self.attacker_host not in self.hosts:
            raise WorkspaceError(f"attacker host {self.attacker_host!r} is not a workspace host")
        for net in self.networks.values():
            missing = net.member_hosts - self.hosts.keys()
            if missing:
                raise WorkspaceError(f"network {net.id} references unknown hosts {sorted(missing)}")
        covered = set().union(*(n.member_hosts for n in self.networks.values())) if self.networks else set()
        orphans = self.hosts.keys() - covered
        if orphans:
            raise WorkspaceError(f"hosts without a network: {sorted(orphans)}")
        for h, _ in self.compromised:
            if h not in self.hosts:
                raise WorkspaceError(f"compromised host {h!r} is unknown")
        for a, b in self.connectivity_hints:
            if a not in self.hosts or b not in self.hosts:
                raise WorkspaceError(f"connectivity hint ({a}, {b}) references an unknown host")
        for host in self.hosts.values():
            for name, value in host.fingerprint.items():
                kind = FINGERPRINT_FIELDS[name][0]
                if value not in self.vocabularies[kind]:
                    raise WorkspaceError(f"host {host.id}: {kind} value {value!r} not registered")
            for p in host.tcp_ports | host.udp_ports:
                if p not in self.vocabularies["port"]:
                    raise WorkspaceError(f"host {host.id}: port {p} not registered")
            for name in host.service_names() | host.applications:
                if name not in self.vocabularies["application"]:
                    raise WorkspaceError(f"host {host.id}: application {name!r} not registered")


def new_workspace(attacker: Host, nets: Iterable[str]) -> Workspace:
    """Workspace holding only the attacker host, compromised at high privileges."""
    nets = list(nets)
    ws = Workspace(attacker_host=attacker.id)
    for n in nets:
        ws.add_network(n)
    add_host(ws, attacker, nets)
    ws.compromised.add((attacker.id, PrivilegeLevel.HIGH))
    return ws


def add_host(ws: Workspace, h: Host, nets: Iterable[str]) -> Workspace:
    """Store ``h`` and record its membership in each of ``nets``."""
    nets = list(nets)
    if h.id in ws.hosts:
        raise WorkspaceError(f"duplicate host id {h.id!r}")
    if not nets:
        raise WorkspaceError(f"host {h.id!r} must join at least one network")
    unknown = [n for n in nets if n not in ws.networks]
    if unknown:
        raise WorkspaceError(f"unknown network id(s) {unknown}")
    ws.hosts[h.id] = h
    for n in nets:
        ws.networks[n].member_hosts.add(h.id)
    ws.register_host_values(h)
    return ws


# ---------------------------------------------------------------------------
# persistence

_PORT = {"type": "integer", "minimum": 1, "maximum": 65535}
_NAME = {"type": "string", "minLength": 1}

HOST_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["id"],
    "additionalProperties": False,
    "properties": {
        "id": _NAME,
        "fingerprint": {
            "type": "object",
            "additionalProperties": False,
            "properties": {f: _NAME for f in FINGERPRINT_FIELDS},
        },
        "tcp_ports": {"type": "array", "items": _PORT, "uniqueItems": True},
        "udp_ports": {"type": "array", "items": _PORT, "uniqueItems": True},
        "services": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "port"],
                "additionalProperties": False,
                "properties": {"name": _NAME, "port": _PORT, "protocol": {"enum": list(PROTOCOLS)}},
            },
        },
        "applications": {"type": "array", "items": _NAME},
    },
}

WORKSPACE_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["format", "networks", "hosts", "attacker_host", "compromised"],
    "properties": {
        "format": {"const": FORMAT_VERSION},
        "attacker_host": _NAME,
        "networks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "hosts"],
                "additionalProperties": False,
                "properties": {"id": _NAME, "hosts": {"type": "array", "items": _NAME}},
            },
        },
        "hosts": {"type": "array", "items": HOST_SCHEMA},
        "compromised": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["host", "privilege"],
                "additionalProperties": False,
                "properties": {"host": _NAME, "privilege": {"enum": [p.value for p in PrivilegeLevel]}},
            },
        },
        "connectivity_hints": {
            "type": "array",
            "items": {"type": "array", "items": _NAME, "minItems": 2, "maxItems": 2},
        },
        "vocabularies": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                **{k: {"type": "array", "items": _NAME} for k in VOCABULARY_KINDS if k != "port"},
                "port": {"type": "array", "items": _PORT},
            },
        },
    },
}


def _vocab_to_json(vocab: Mapping[str, set]) -> dict[str, list]:
    return {k: sorted(vocab.get(k, ())) for k in VOCABULARY_KINDS}


def workspace_to_dict(ws: Workspace) -> dict[str, Any]:
    return {
        "format": FORMAT_VERSION,
        "attacker_host": ws.attacker_host,
        "networks": [
            {"id": n.id, "hosts": sorted(n.member_hosts)} for n in sorted(ws.networks.values(), key=lambda n: n.id)
        ],
        "hosts": [ws.hosts[h].to_dict() for h in sorted(ws.hosts)],
        "compromised": [{"host": h, "privilege": p.value} for h, p in sorted(ws.compromised)],
        "connectivity_hints": [list(p) for p in sorted(ws.connectivity_hints)],
        "vocabularies": _vocab_to_json(ws.vocabularies),
    }


def dumps(data: Any) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def save_workspace(ws: Workspace) -> str:
    return dumps(workspace_to_dict(ws))


def parse_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(exc.msg, line=exc.lineno) from None


def check_schema(doc: Any, schema: Mapping[str, Any]) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path).lstrip(".")
        raise SchemaError(err.message, path=path or "<root>")


def workspace_from_dict(doc: Mapping[str, Any]) -> Workspace:
    check_schema(doc, WORKSPACE_SCHEMA)
    ws = Workspace(attacker_host=doc["attacker_host"])
    for i, h in enumerate(doc["hosts"]):
        try:
            host = Host.from_dict(h)
        except (WorkspaceError, ValueError) as exc:
            raise SchemaError(str(exc), path=f"hosts[{i}]") from None
        if host.id in ws.hosts:
            raise SchemaError(f"duplicate host id {host.id!r}", path=f"hosts[{i}].id")
        ws.hosts[host.id] = host
    for i, n in enumerate(doc["networks"]):
        if n["id"] in ws.networks:
            raise SchemaError(f"duplicate network id {n['id']!r}", path=f"networks[{i}].id")
        ws.networks[n["id"]] = NetworkSegment(n["id"], set(n["hosts"]))
    ws.compromised = {(c["host"], PrivilegeLevel(c["privilege"])) for c in doc["compromised"]}
    ws.connectivity_hints = {(a, b) for a, b in doc.get("connectivity_hints", [])}
    if "vocabularies" in doc:
        for k, values in doc["vocabularies"].items():
            ws.vocabularies[k] = set(values)
    else:
        for host in ws.hosts.values():
            ws.register_host_values(host)
    try:
        ws.validate()
    except WorkspaceError as exc:
        raise SchemaError(str(exc)) from None
    return ws


def load_workspace(text: str) -> Workspace:
    return workspace_from_dict(parse_json(text))

