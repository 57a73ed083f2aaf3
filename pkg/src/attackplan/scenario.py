"""Seeded generator of ground-truth test networks.

Two topologies are produced. ``star``: five leaf subnets, each joined to a
main segment where the attacker sits. ``chain``: a line of segments where
the target is ``depth`` router hops away from the attacker.

A router here is a dual-homed machine: an ordinary (exploitable) host that
is a member of two segments. Hosts reach each other only inside a shared
segment, so crossing a router means compromising it first (a pivot).
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .netmodel import (
    WORKSPACE_SCHEMA,
    Host,
    NetworkSegment,
    OsFingerprint,
    PrivilegeLevel,
    SchemaError,
    ServiceBinding,
    Workspace,
    check_schema,
    dumps,
    parse_json,
    workspace_from_dict,
    workspace_to_dict,
)

RNG_NAME = "python-mt19937"
ATTACKER_ID = "localhost"

WELL_KNOWN_SERVICES: dict[int, str] = {
    21: "ftp",
    22: "ssh",
    23: "telnet",
    25: "smtp",
    80: "http",
    110: "pop3",
    139: "netbios_ssn",
    443: "https",
    445: "smb",
    3389: "rdp",
    5053: "ovtrcd",
}


@dataclass(frozen=True)
class MachineTypeProfile:
    name: str
    fingerprint: OsFingerprint
    share: float
    open_tcp_ports: tuple[int, ...]
    is_server: bool
    # equally likely values for ``fingerprint.version`` when it is left unset
    version_choices: tuple[str, ...] = ()
    services: tuple[tuple[int, str], ...] = ()

    def fingerprints(self) -> list[OsFingerprint]:
        if not self.version_choices:
            return [self.fingerprint]
        return [_with_version(self.fingerprint, v) for v in self.version_choices]

    def service_for(self, port: int) -> str | None:
        return dict(self.services).get(port, WELL_KNOWN_SERVICES.get(port))


def _with_version(fp: OsFingerprint, version: str) -> OsFingerprint:
    d = fp.to_dict()
    d["version"] = version
    return OsFingerprint.from_dict(d)


MACHINE_PROFILES: tuple[MachineTypeProfile, ...] = (
    MachineTypeProfile(
        "windows_desktop",
        OsFingerprint(os="Windows", version="WinXp", edition="Professional", servicepack="Sp3", architecture="I386"),
        0.50,
        (139, 445),
        False,
    ),
    MachineTypeProfile(
        "windows_server",
        OsFingerprint(os="Windows", version="Win2003", edition="Server", servicepack="Sp2", architecture="I386"),
        0.14,
        (25, 80, 110, 139, 443, 445, 3389),
        True,
    ),
    MachineTypeProfile(
        "linux_desktop",
        OsFingerprint(os="Linux", distro="Ubuntu", architecture="I386"),
        0.27,
        (22,),
        False,
        version_choices=("V_8_04", "V_8_10"),
    ),
    MachineTypeProfile(
        "linux_server",
        OsFingerprint(os="Linux", distro="Debian", version="V_4_0", architecture="I386"),
        0.09,
        (21, 22, 23, 25, 80, 110, 443),
        True,
    ),
)


def check_profiles(profiles: Sequence[MachineTypeProfile]) -> None:
    total = sum(p.share for p in profiles)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"profile shares sum to {total}, expected 1.0")


def largest_remainder(shares: Sequence[float], n: int) -> list[int]:
    """Integer counts proportional to ``shares`` that sum exactly to ``n``."""
    quotas = [s * n for s in shares]
    counts = [int(q) for q in quotas]
    order = sorted(range(len(shares)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


@dataclass(frozen=True)
class Router:
    host: str
    segments: tuple[str, str]


@dataclass
class GroundTruthNetwork:
    kind: str
    attacker_host: str
    entry_segment: str
    networks: dict[str, NetworkSegment] = field(default_factory=dict)
    hosts: dict[str, Host] = field(default_factory=dict)
    routers: list[Router] = field(default_factory=list)
    host_types: dict[str, str] = field(default_factory=dict)
    targets: list[str] = field(default_factory=list)
    connectivity_hints: set[tuple[str, str]] = field(default_factory=set)
    seed: int | None = None
    params: dict[str, Any] = field(default_factory=dict)

    def segments_of(self, host_id: str) -> set[str]:
        return {n.id for n in self.networks.values() if host_id in n.member_hosts}

    def shares_segment(self, a: str, b: str) -> bool:
        return bool(self.segments_of(a) & self.segments_of(b))

    def can_reach(self, a: str, b: str) -> bool:
        """IP reachability from ``a`` to ``b`` (same segment or an explicit hint)."""
        return self.shares_segment(a, b) or (a, b) in self.connectivity_hints

    def router_graph(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {n: set() for n in self.networks}
        for r in self.routers:
            a, b = r.segments
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def hops_from_entry(self) -> dict[str, int]:
        adj = self.router_graph()
        dist = {self.entry_segment: 0}
        queue = deque([self.entry_segment])
        while queue:
            cur = queue.popleft()
            for nxt in sorted(adj[cur]):
                if nxt not in dist:
                    dist[nxt] = dist[cur] + 1
                    queue.append(nxt)
        return dist

    def gateways(self) -> set[str]:
        return {r.host for r in self.routers}

    def validate(self) -> None:
        if self.attacker_host not in self.hosts:
            raise ValueError("attacker host missing from ground truth")
        if self.entry_segment not in self.networks:
            raise ValueError("entry segment missing")
        if self.attacker_host not in self.networks[self.entry_segment].member_hosts:
            raise ValueError("attacker host is not on the entry segment")
        hops = self.hops_from_entry()
        unreachable = set(self.networks) - hops.keys()
        if unreachable:
            raise ValueError(f"segments unreachable from entry: {sorted(unreachable)}")
        for r in self.routers:
            if not set(r.segments) <= self.segments_of(r.host):
                raise ValueError(f"router {r.host} is not on both of its segments")

    # -- file format -------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        doc = workspace_to_dict(self._as_workspace())
        doc["routers"] = [
            {"host": r.host, "segments": list(r.segments)} for r in sorted(self.routers, key=lambda r: r.host)
        ]
        doc["entry_segment"] = self.entry_segment
        doc["host_types"] = dict(sorted(self.host_types.items()))
        doc["targets"] = list(self.targets)
        doc["meta"] = {"kind": self.kind, "seed": self.seed, "rng": RNG_NAME, "params": self.params}
        return doc

    def _as_workspace(self) -> Workspace:
        ws = Workspace(attacker_host=self.attacker_host)
        for n in self.networks.values():
            ws.networks[n.id] = NetworkSegment(n.id, set(n.member_hosts))
        for h in self.hosts.values():
            ws.hosts[h.id] = h
            ws.register_host_values(h)
        ws.compromised = {(self.attacker_host, PrivilegeLevel.HIGH)}
        ws.connectivity_hints = set(self.connectivity_hints)
        return ws

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "GroundTruthNetwork":
        schema = dict(WORKSPACE_SCHEMA)
        schema["required"] = list(WORKSPACE_SCHEMA["required"]) + ["routers", "entry_segment"]
        check_schema(doc, schema)
        ws = workspace_from_dict({k: v for k, v in doc.items() if k in WORKSPACE_SCHEMA["properties"]})
        meta = doc.get("meta", {})
        gt = cls(
            kind=meta.get("kind", "custom"),
            attacker_host=ws.attacker_host,
            entry_segment=doc["entry_segment"],
            networks=ws.networks,
            hosts=ws.hosts,
            routers=[Router(r["host"], tuple(r["segments"])) for r in doc["routers"]],
            host_types=dict(doc.get("host_types", {})),
            targets=list(doc.get("targets", [])),
            connectivity_hints=ws.connectivity_hints,
            seed=meta.get("seed"),
            params=dict(meta.get("params", {})),
        )
        try:
            gt.validate()
        except ValueError as exc:
            raise SchemaError(str(exc)) from None
        return gt


def save_ground_truth(gt: GroundTruthNetwork) -> str:
    return dumps(gt.to_dict())


def load_ground_truth(text: str) -> GroundTruthNetwork:
    return GroundTruthNetwork.from_dict(parse_json(text))


# ---------------------------------------------------------------------------
# generators


def _make_host(host_id: str, profile: MachineTypeProfile, rng: random.Random) -> Host:
    fp = profile.fingerprint
    if profile.version_choices:
        fp = _with_version(fp, profile.version_choices[rng.randrange(len(profile.version_choices))])
    ports = list(profile.open_tcp_ports)
    if profile.is_server:
        del ports[rng.randrange(len(ports))]
    services = set()
    for p in ports:
        name = profile.service_for(p)
        if name is not None:
            services.add(ServiceBinding(name, p, "tcp"))
    return Host(host_id, fp, tcp_ports=set(ports), services=services)


def _sample_types(n: int, profiles: Sequence[MachineTypeProfile], rng: random.Random) -> list[MachineTypeProfile]:
    counts = largest_remainder([p.share for p in profiles], n)
    types = [p for p, c in zip(profiles, counts) for _ in range(c)]
    rng.shuffle(types)
    return types


def _attacker() -> Host:
    return Host(ATTACKER_ID, OsFingerprint())


def _pick(candidates: list[str], hosts: dict[str, Host], catalog, rng: random.Random) -> str:
    """Seeded choice, restricted to hosts some exploit works on when a catalog is given."""
    if catalog is not None:
        from .exploitdb import is_exploitable

        usable = [h for h in candidates if is_exploitable(hosts[h], catalog)]
        if usable:
            candidates = usable
    return candidates[rng.randrange(len(candidates))]


def _split(n: int, parts: int) -> list[int]:
    base, rem = divmod(n, parts)
    return [base + (1 if i < rem else 0) for i in range(parts)]


def generate_star(
    n_machines: int,
    n_subnets: int = 5,
    seed: int = 0,
    profiles: Sequence[MachineTypeProfile] = MACHINE_PROFILES,
    catalog=None,
) -> GroundTruthNetwork:
    """Leaf subnets joined to one main segment holding the attacker.

    Each leaf has one dual-homed gateway (also on the main segment), so
    every leaf is one router hop from the entry segment. Machines are split
    evenly across leaves, remainder round-robin.
    """
    if n_subnets < 1:
        raise ValueError("n_subnets must be >= 1")
    if n_machines < n_subnets:
        raise ValueError(f"need at least one machine per subnet ({n_machines} < {n_subnets})")
    check_profiles(profiles)
    rng = random.Random(seed)
    types = _sample_types(n_machines, profiles, rng)

    main = "10.0.0.0/24"
    gt = GroundTruthNetwork(
        kind="star",
        attacker_host=ATTACKER_ID,
        entry_segment=main,
        seed=seed,
        params={"n_machines": n_machines, "n_subnets": n_subnets},
    )
    gt.networks[main] = NetworkSegment(main, {ATTACKER_ID})
    gt.hosts[ATTACKER_ID] = _attacker()

    it = iter(types)
    leaf_members: list[list[str]] = []
    for k, size in enumerate(_split(n_machines, n_subnets), start=1):
        seg = f"10.0.{k}.0/24"
        net = NetworkSegment(seg)
        members = []
        for j in range(1, size + 1):
            hid = f"10.0.{k}.{j}"
            profile = next(it)
            gt.hosts[hid] = _make_host(hid, profile, rng)
            gt.host_types[hid] = profile.name
            net.member_hosts.add(hid)
            members.append(hid)
        gt.networks[seg] = net
        leaf_members.append(members)

    for k, members in enumerate(leaf_members, start=1):
        gw = _pick(members, gt.hosts, catalog, rng)
        gt.networks[main].member_hosts.add(gw)
        gt.routers.append(Router(gw, (main, f"10.0.{k}.0/24")))

    gateways = gt.gateways()
    inner = [h for members in leaf_members for h in members if h not in gateways]
    if inner:
        gt.targets = [_pick(inner, gt.hosts, catalog, rng)]
    else:
        gt.targets = [sorted(gateways)[0]]
    gt.validate()
    return gt


def generate_chain(
    depth: int,
    hosts_per_subnet: int = 3,
    seed: int = 0,
    n_machines: int | None = None,
    profiles: Sequence[MachineTypeProfile] = MACHINE_PROFILES,
    catalog=None,
) -> GroundTruthNetwork:
    """A line of ``depth + 1`` segments; the target sits ``depth`` hops away.

    Segment ``k`` holds hosts ``10.0.(k+1).*``; the attacker is on segment 0
    and the target on the last one. Between consecutive segments one host of
    the earlier segment is dual-homed into the next. Intermediate segments
    hold ``hosts_per_subnet`` machines; when ``n_machines`` is given, the
    remaining machines are split between the first and the last segment.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if hosts_per_subnet < 1:
        raise ValueError("hosts_per_subnet must be >= 1")
    check_profiles(profiles)
    n_segments = depth + 1
    sizes = [hosts_per_subnet] * n_segments
    if n_machines is not None:
        inner = hosts_per_subnet * (n_segments - 2)
        rest = n_machines - inner
        if rest < 2:
            raise ValueError(f"n_machines={n_machines} too small for depth {depth}")
        sizes[0], sizes[-1] = _split(rest, 2)
    total = sum(sizes)

    rng = random.Random(seed)
    types = iter(_sample_types(total, profiles, rng))
    gt = GroundTruthNetwork(
        kind="chain",
        attacker_host=ATTACKER_ID,
        entry_segment="10.0.1.0/24",
        seed=seed,
        params={"depth": depth, "hosts_per_subnet": hosts_per_subnet, "n_machines": total},
    )
    gt.hosts[ATTACKER_ID] = _attacker()
    segment_members: list[list[str]] = []
    for k, size in enumerate(sizes):
        seg = f"10.0.{k + 1}.0/24"
        net = NetworkSegment(seg)
        members = []
        for j in range(1, size + 1):
            hid = f"10.0.{k + 1}.{j}"
            profile = next(types)
            gt.hosts[hid] = _make_host(hid, profile, rng)
            gt.host_types[hid] = profile.name
            net.member_hosts.add(hid)
            members.append(hid)
        gt.networks[seg] = net
        segment_members.append(members)
    gt.networks[gt.entry_segment].member_hosts.add(ATTACKER_ID)

    for k in range(depth):
        gw = _pick(segment_members[k], gt.hosts, catalog, rng)
        nxt = f"10.0.{k + 2}.0/24"
        gt.networks[nxt].member_hosts.add(gw)
        gt.routers.append(Router(gw, (f"10.0.{k + 1}.0/24", nxt)))

    last = segment_members[-1]
    gt.targets = [_pick(last, gt.hosts, catalog, rng)]
    gt.validate()
    return gt


def export_workspace(gt: GroundTruthNetwork, visibility: str = "full") -> Workspace:
    """The attacker's view of ``gt``.

    Only ``full`` visibility is implemented: every ground-truth fact is
    copied and the attacker host is the only compromised machine.
    """
    if visibility != "full":
        raise ValueError(f"visibility {visibility!r} is not supported (only 'full')")
    ws = gt._as_workspace().copy()
    ws.validate()
    return ws


def pick_goal_hosts(gt: GroundTruthNetwork, k: int, seed: int = 0, catalog=None) -> list[str]:
    """``k`` distinct goal hosts, preferring non-gateway machines.

    With a catalog, machines no exploit works on are only used when needed.
    """
    rng = random.Random(seed)
    gateways = gt.gateways()
    inner = [h for h in gt.hosts if h != gt.attacker_host and h not in gateways]
    outer = sorted(gateways, key=host_sort_key)
    if k > len(inner) + len(outer):
        raise ValueError(f"cannot pick {k} goals from {len(inner) + len(outer)} machines")
    rng.shuffle(inner)
    pool = inner + outer
    if catalog is not None:
        from .exploitdb import is_exploitable

        pool.sort(key=lambda h: not is_exploitable(gt.hosts[h], catalog))
    return sorted(pool[:k], key=host_sort_key)


def host_sort_key(host_id: str) -> tuple:
    """Numeric order for dotted-quad ids, lexical for the rest."""
    parts = host_id.split(".")
    if all(p.isdigit() for p in parts):
        return (0, tuple(int(p) for p in parts))
    return (1, host_id)


def shares(gt: GroundTruthNetwork, hosts: Iterable[str] | None = None) -> dict[str, float]:
    """Fraction of machines per profile name."""
    ids = list(hosts) if hosts is not None else list(gt.host_types)
    out: dict[str, float] = {}
    for h in ids:
        out[gt.host_types[h]] = out.get(gt.host_types[h], 0) + 1
    return {k: v / len(ids) for k, v in out.items()}
