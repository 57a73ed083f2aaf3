"""Exploit catalog and its expansion into one planner action per OS variant."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .naming import sanitize
from .netmodel import (
    FINGERPRINT_FIELDS,
    FORMAT_VERSION,
    Host,
    OsFingerprint,
    PrivilegeLevel,
    SchemaError,
    check_schema,
    dumps,
    parse_json,
)

MODEL_ACTIONS = ("IP_connect", "TCP_connect", "UDP_connect", "Mark_as_compromised")

# Action names are "<exploit pddl id>__v<k>", k counting variants from 1.
VARIANT_SUFFIX = re.compile(r"__v[0-9]+\Z")

# Integer runtimes for synthetic exploits are drawn from this closed range (seconds).
RUNTIME_RANGE = (2, 60)


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class Const:
    """A constant argument of a lifted atom; ``kind`` is its PDDL type."""

    kind: str
    value: str | int


Arg = str | Const  # strings are variables such as "?t"
LiftedAtom = tuple[str, tuple[Arg, ...]]


@dataclass(frozen=True)
class ExploitTemplate:
    id: str
    variants: tuple[OsFingerprint, ...]
    required_port: int | None = None
    protocol: str = "tcp"
    required_service: str | None = None
    result_privilege: PrivilegeLevel = PrivilegeLevel.HIGH
    avg_runtime: float = 0.0
    kind: str = "remote"
    name: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise CatalogError("exploit id must be non-empty")
        if not self.variants:
            raise CatalogError(f"exploit {self.id}: at least one OS variant is required")
        if self.avg_runtime < 0:
            raise CatalogError(f"exploit {self.id}: avg_runtime must be >= 0")
        if self.kind not in ("remote", "local"):
            raise CatalogError(f"exploit {self.id}: unknown kind {self.kind!r}")
        if self.kind == "remote":
            if self.required_port is None or not 1 <= self.required_port <= 65535:
                raise CatalogError(f"exploit {self.id}: remote exploits need a port in 1..65535")
            if self.protocol not in ("tcp", "udp"):
                raise CatalogError(f"exploit {self.id}: unknown protocol {self.protocol!r}")

    @property
    def display_name(self) -> str:
        return self.name or self.id

    @property
    def pddl_id(self) -> str:
        return sanitize(self.id, prefix="x")

    def action_name(self, variant_index: int) -> str:
        return f"{self.pddl_id}__v{variant_index + 1}"

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "kind": self.kind,
            "variants": [v.to_dict() for v in self.variants],
            "result_privilege": self.result_privilege.value,
            "avg_runtime": self.avg_runtime,
        }
        if self.name is not None:
            out["name"] = self.name
        if self.kind == "remote":
            out["port"] = self.required_port
            out["protocol"] = self.protocol
        if self.required_service is not None:
            out["service"] = self.required_service
        return out

    def matches(self, host: Host) -> int | None:
        """Index of the first variant ``host`` is vulnerable to, else ``None``.

        For remote exploits the port must be open and the service (when
        required) present; local exploits check the fingerprint only.
        """
        if self.kind == "remote":
            if self.required_port not in host.ports(self.protocol):
                return None
            if self.required_service is not None and self.required_service not in host.service_names():
                return None
        for i, v in enumerate(self.variants):
            if host.fingerprint.satisfies(v):
                return i
        return None


@dataclass(frozen=True)
class ActionTemplate:
    """One planner action: an exploit restricted to one OS variant."""

    name: str
    exploit: ExploitTemplate
    variant_index: int
    parameters: tuple[tuple[str, str], ...]
    precondition: tuple[LiftedAtom, ...]
    fingerprint_atoms: tuple[LiftedAtom, ...]
    effect: LiftedAtom
    cost: float

    @property
    def variant(self) -> OsFingerprint:
        return self.exploit.variants[self.variant_index]

    def atoms(self) -> tuple[LiftedAtom, ...]:
        return self.precondition + self.fingerprint_atoms + (self.effect,)

    def constants(self) -> set[Const]:
        return {a for _, args in self.atoms() for a in args if isinstance(a, Const)}


@dataclass(frozen=True)
class Catalog:
    exploits: tuple[ExploitTemplate, ...] = ()
    _index: dict[str, ExploitTemplate] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        seen: dict[str, str] = {}
        reserved = {m.lower() for m in MODEL_ACTIONS}
        for e in self.exploits:
            key = e.pddl_id.lower()
            if key in seen or e.id in self._index:
                raise CatalogError(f"duplicate exploit id {e.id!r} (clashes with {seen.get(key, e.id)!r})")
            if key in reserved:
                raise CatalogError(f"exploit id {e.id!r} clashes with a model action name")
            if VARIANT_SUFFIX.search(e.pddl_id):
                raise CatalogError(f"exploit id {e.id!r} ends like a variant action name")
            seen[key] = e.id
            self._index[e.id] = e

    def __len__(self) -> int:
        return len(self.exploits)

    def __iter__(self):
        return iter(self.exploits)

    def __getitem__(self, exploit_id: str) -> ExploitTemplate:
        return self._index[exploit_id]

    def action_templates(self) -> list[ActionTemplate]:
        return expand_variants(self)


# ---------------------------------------------------------------------------
# file format

_VARIANT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {f: {"type": "string", "minLength": 1} for f in FINGERPRINT_FIELDS},
}

CATALOG_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["format", "exploits"],
    "properties": {
        "format": {"const": FORMAT_VERSION},
        "exploits": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "variants", "avg_runtime"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "name": {"type": "string", "minLength": 1},
                    "kind": {"enum": ["remote", "local"]},
                    "variants": {"type": "array", "minItems": 1, "items": _VARIANT_SCHEMA},
                    "port": {"type": "integer", "minimum": 1, "maximum": 65535},
                    "protocol": {"enum": ["tcp", "udp"]},
                    "service": {"type": "string", "minLength": 1},
                    "result_privilege": {"enum": [p.value for p in PrivilegeLevel]},
                    "avg_runtime": {"type": "number", "minimum": 0},
                },
            },
        },
    },
}


def _exploit_from_dict(d: Mapping[str, Any]) -> ExploitTemplate:
    return ExploitTemplate(
        id=d["id"],
        name=d.get("name"),
        kind=d.get("kind", "remote"),
        variants=tuple(OsFingerprint.from_dict(v) for v in d["variants"]),
        required_port=d.get("port"),
        protocol=d.get("protocol", "tcp"),
        required_service=d.get("service"),
        result_privilege=PrivilegeLevel(d.get("result_privilege", PrivilegeLevel.HIGH.value)),
        avg_runtime=d["avg_runtime"],
    )


def load_catalog(text: str) -> Catalog:
    doc = parse_json(text)
    check_schema(doc, CATALOG_SCHEMA)
    exploits = []
    for i, d in enumerate(doc["exploits"]):
        if any(not v for v in d["variants"]):
            raise SchemaError("empty OS variant (no fields set)", path=f"exploits[{i}].variants")
        try:
            exploits.append(_exploit_from_dict(d))
        except CatalogError as exc:
            raise SchemaError(str(exc), path=f"exploits[{i}]") from None
    try:
        return Catalog(tuple(exploits))
    except CatalogError as exc:
        raise SchemaError(str(exc), path="exploits") from None


def save_catalog(catalog: Catalog) -> str:
    return dumps({"format": FORMAT_VERSION, "exploits": [e.to_dict() for e in catalog]})


# ---------------------------------------------------------------------------
# expansion


def fingerprint_atoms(var: str, fp: OsFingerprint) -> tuple[LiftedAtom, ...]:
    return tuple(
        (FINGERPRINT_FIELDS[f][1], (var, Const(FINGERPRINT_FIELDS[f][0], value))) for f, value in fp.items()
    )


def _remote_template(e: ExploitTemplate, k: int) -> ActionTemplate:
    proto = e.protocol.upper()
    pre: list[LiftedAtom] = [("compromised", ("?s",))]
    if e.required_service is not None:
        pre.append(("has_service", ("?t", Const("application", e.required_service))))
    pre.append((f"{proto}_connectivity", ("?s", "?t", Const("port", e.required_port))))
    return ActionTemplate(
        name=e.action_name(k),
        exploit=e,
        variant_index=k,
        parameters=(("?s", "host"), ("?t", "host")),
        precondition=tuple(pre),
        fingerprint_atoms=fingerprint_atoms("?t", e.variants[k]),
        effect=("installed_agent", ("?t", Const("privileges", e.result_privilege.value))),
        cost=e.avg_runtime,
    )


def _local_template(e: ExploitTemplate, k: int) -> ActionTemplate:
    pre: list[LiftedAtom] = [("installed_agent", ("?h", Const("privileges", PrivilegeLevel.LOW.value)))]
    if e.required_service is not None:
        pre.append(("has_service", ("?h", Const("application", e.required_service))))
    return ActionTemplate(
        name=e.action_name(k),
        exploit=e,
        variant_index=k,
        parameters=(("?h", "host"),),
        precondition=tuple(pre),
        fingerprint_atoms=fingerprint_atoms("?h", e.variants[k]),
        effect=("installed_agent", ("?h", Const("privileges", e.result_privilege.value))),
        cost=e.avg_runtime,
    )


def expand_variants(catalog: Iterable[ExploitTemplate]) -> list[ActionTemplate]:
    """One :class:`ActionTemplate` per (exploit, OS variant), in catalog order."""
    out = []
    for e in catalog:
        build = _remote_template if e.kind == "remote" else _local_template
        out.extend(build(e, k) for k in range(len(e.variants)))
    return out


def is_exploitable(host: Host, catalog: Iterable[ExploitTemplate]) -> bool:
    """Whether some remote exploit in ``catalog`` works against ``host``."""
    return any(e.kind == "remote" and e.matches(host) is not None for e in catalog)


# ---------------------------------------------------------------------------
# synthetic catalogs

# OS variants that no standard machine type satisfies; used as non-matching variants.
DECOY_FINGERPRINTS: tuple[OsFingerprint, ...] = (
    OsFingerprint(os="Solaris", version="V_10", architecture="Sun4U"),
    OsFingerprint(os="Solaris", version="V_9", architecture="Sparc"),
    OsFingerprint(os="Windows", version="WinXp", edition="Professional", servicepack="Sp2", architecture="I386"),
    OsFingerprint(os="Windows", version="Win2000", edition="Server", servicepack="Sp4", architecture="I386"),
    OsFingerprint(os="Windows", version="WinVista", edition="Business", architecture="I386"),
    OsFingerprint(os="Windows", version="Win2003", edition="Server", servicepack="Sp1", architecture="I386"),
    OsFingerprint(os="Windows", version="Win7", edition="Professional", architecture="X86_64"),
    OsFingerprint(os="Linux", distro="RedHat", version="V_5", architecture="I386"),
    OsFingerprint(os="Linux", distro="Debian", version="V_5_0", architecture="I386"),
    OsFingerprint(os="Linux", distro="Ubuntu", version="V_9_04", architecture="I386"),
    OsFingerprint(os="Linux", distro="Fedora", version="V_10", architecture="I386"),
    OsFingerprint(os="Linux", distro="Suse", version="V_11", architecture="X86_64"),
    OsFingerprint(os="FreeBSD", version="V_7_0", architecture="I386"),
    OsFingerprint(os="OpenBSD", version="V_4_5", architecture="I386"),
    OsFingerprint(os="MacOSX", version="V_10_5", architecture="PowerPC"),
    OsFingerprint(os="AIX", version="V_5_3", architecture="Power"),
    OsFingerprint(os="HP_UX", version="V_11i", architecture="PA_RISC"),
)


def _target_pool(profiles) -> list[tuple[OsFingerprint, tuple[int, ...]]]:
    pool = []
    for p in profiles:
        for fp in p.fingerprints():
            pool.append((fp, tuple(p.open_tcp_ports)))
    return pool


def generate_synthetic_catalog(
    n_exploits: int,
    variants_per_exploit: int = 6,
    seed: int = 0,
    port_pool: Sequence[int] | None = None,
    os_pool: Sequence[OsFingerprint] | None = None,
    profiles=None,
    high_privilege_share: float = 0.75,
    service_share: float = 0.5,
) -> Catalog:
    """Seeded random catalog in which each exploit works on some machine type.

    Every exploit has exactly one variant matching a fingerprint from
    ``os_pool`` (default: the machine types of the scenario generator); the
    remaining variants are drawn from OS versions no machine type runs. The
    first exploits cycle through every (fingerprint, canonical port) pair so
    that, with enough exploits, every generated machine is exploitable even
    after a server loses one of its ports.
    """
    from .scenario import MACHINE_PROFILES, WELL_KNOWN_SERVICES

    if n_exploits < 1:
        raise CatalogError("n_exploits must be >= 1")
    if variants_per_exploit < 1:
        raise CatalogError("variants_per_exploit must be >= 1")
    profiles = MACHINE_PROFILES if profiles is None else profiles
    targets = _target_pool(profiles)
    if os_pool is None:
        os_pool = [fp for fp, _ in targets]
    if port_pool is None:
        port_pool = sorted({p for _, ports in targets for p in ports})
    if not os_pool or not port_pool:
        raise CatalogError("port_pool and os_pool must be non-empty")

    ports_allowed = set(port_pool)
    coverage: list[tuple[OsFingerprint, int]] = []
    for fp in os_pool:
        ports = sorted({p for tfp, tports in targets if tfp.satisfies(fp) for p in tports} & ports_allowed)
        coverage.extend((fp, p) for p in (ports or sorted(ports_allowed)))

    all_targets = [fp for fp, _ in targets] + list(os_pool)
    decoys = [d for d in DECOY_FINGERPRINTS if not any(t.satisfies(d) for t in all_targets)]
    n_decoys = variants_per_exploit - 1
    j = 0
    while len(decoys) < n_decoys:
        decoys.append(OsFingerprint(os=f"Legacy_{j}", version="V_1"))
        j += 1

    rng = random.Random(seed)
    exploits = []
    for i in range(n_exploits):
        fp, port = coverage[i] if i < len(coverage) else coverage[rng.randrange(len(coverage))]
        service = WELL_KNOWN_SERVICES.get(port)
        if service is not None and rng.random() >= service_share:
            service = None
        variants = [decoys[k] for k in sorted(rng.sample(range(len(decoys)), n_decoys))]
        variants.insert(rng.randrange(variants_per_exploit), fp)
        priv = PrivilegeLevel.HIGH if rng.random() < high_privilege_share else PrivilegeLevel.LOW
        runtime = rng.randint(*RUNTIME_RANGE)
        label = service or f"tcp{port}"
        exploits.append(
            ExploitTemplate(
                id=f"synthetic_{i:04d}_{label}",
                name=f"Synthetic {label} exploit {i}",
                variants=tuple(variants),
                required_port=port,
                protocol="tcp",
                required_service=service,
                result_privilege=priv,
                avg_runtime=float(runtime),
            )
        )
    return Catalog(tuple(exploits))
