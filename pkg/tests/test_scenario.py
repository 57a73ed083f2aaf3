from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attackplan.exploitdb import generate_synthetic_catalog, is_exploitable
from attackplan.netmodel import PrivilegeLevel, save_workspace
from attackplan.scenario import (
    MACHINE_PROFILES,
    RNG_NAME,
    export_workspace,
    generate_chain,
    generate_star,
    largest_remainder,
    load_ground_truth,
    pick_goal_hosts,
    save_ground_truth,
    shares,
)

PROFILES = {p.name: p for p in MACHINE_PROFILES}


def test_profile_table():
    assert {p.name: p.share for p in MACHINE_PROFILES} == {
        "windows_desktop": 0.50, "windows_server": 0.14, "linux_desktop": 0.27, "linux_server": 0.09,
    }
    assert PROFILES["windows_server"].open_tcp_ports == (25, 80, 110, 139, 443, 445, 3389)
    assert PROFILES["linux_server"].open_tcp_ports == (21, 22, 23, 25, 80, 110, 443)
    assert abs(sum(p.share for p in MACHINE_PROFILES) - 1.0) < 1e-9


@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6), st.integers(0, 2000))
def test_largest_remainder_sums(raw, n):
    total = sum(raw)
    counts = largest_remainder([r / total for r in raw], n)
    assert sum(counts) == n
    assert all(abs(c - r / total * n) < 1 + 1e-9 for c, r in zip(counts, raw))


def test_star_480():
    gt = generate_star(480, 5, seed=1)
    assert len(gt.hosts) - 1 == 480
    assert len(gt.networks) == 6
    hops = gt.hops_from_entry()
    assert sorted(hops.values()) == [0, 1, 1, 1, 1, 1]


def test_star_minimum():
    gt = generate_star(5, 5, seed=1)
    leaves = [n for n in gt.networks.values() if n.id != gt.entry_segment]
    assert len(leaves) == 5
    assert all(len([h for h in n.member_hosts]) == 1 for n in leaves)


def test_star_too_few_machines():
    with pytest.raises(ValueError):
        generate_star(4, 5, seed=1)


def test_star_split_near_equal():
    gt = generate_star(23, 5, seed=3)
    sizes = sorted(sum(1 for h in n.member_hosts if h.startswith(f"10.0.{k}."))
                   for k, n in enumerate(sorted(gt.networks.values(), key=lambda n: n.id)) if k > 0)
    assert sizes == [4, 4, 5, 5, 5]


def test_type_shares_1000():
    gt = generate_star(1000, 5, seed=2)
    got = shares(gt)
    for p in MACHINE_PROFILES:
        assert abs(got[p.name] - p.share) <= 0.03


def test_server_port_removal():
    gt = generate_star(300, 5, seed=4)
    for hid, kind in gt.host_types.items():
        p = PROFILES[kind]
        ports = gt.hosts[hid].tcp_ports
        if p.is_server:
            assert len(ports) == len(p.open_tcp_ports) - 1
            assert ports < set(p.open_tcp_ports)
        else:
            assert ports == set(p.open_tcp_ports)


def test_ubuntu_versions_both_used():
    gt = generate_star(400, 5, seed=5)
    versions = {gt.hosts[h].fingerprint.version for h, k in gt.host_types.items() if k == "linux_desktop"}
    assert versions == {"V_8_04", "V_8_10"}


def test_services_follow_ports():
    gt = generate_star(60, 5, seed=6)
    for h in gt.hosts.values():
        for b in h.services:
            assert b.port in h.tcp_ports
    smb = [b for h in gt.hosts.values() for b in h.services if b.port == 445]
    assert smb and all(b.name == "smb" for b in smb)


def test_chain_depth_one():
    gt = generate_chain(1, 3, seed=1)
    assert len(gt.networks) == 2
    assert len(gt.routers) == 1


@pytest.mark.parametrize("depth", [1, 4, 20])
def test_chain_target_depth(depth):
    gt = generate_chain(depth, 3, seed=2)
    hops = gt.hops_from_entry()
    (target,) = gt.targets
    assert max(hops[s] for s in gt.segments_of(target)) == depth
    assert max(hops.values()) == depth


def test_chain_machine_budget():
    gt = generate_chain(20, 3, seed=1, n_machines=120)
    assert len(gt.hosts) - 1 == 120
    with pytest.raises(ValueError):
        generate_chain(20, 3, seed=1, n_machines=10)


def test_chain_intermediate_hosts_exploitable():
    cat = generate_synthetic_catalog(30, 6, seed=7)
    gt = generate_chain(8, 3, seed=3, catalog=cat)
    for r in gt.routers:
        assert is_exploitable(gt.hosts[r.host], cat)
    assert all(is_exploitable(gt.hosts[t], cat) for t in gt.targets)


@pytest.mark.parametrize("make", [lambda s: generate_star(40, 5, seed=s), lambda s: generate_chain(5, 3, seed=s)])
def test_seeded_determinism(make):
    assert save_ground_truth(make(9)) == save_ground_truth(make(9))
    assert save_ground_truth(make(9)) != save_ground_truth(make(10))


def test_ground_truth_round_trip():
    gt = generate_chain(3, 2, seed=5)
    text = save_ground_truth(gt)
    again = load_ground_truth(text)
    assert save_ground_truth(again) == text
    assert again.routers == gt.routers
    assert f'"rng": "{RNG_NAME}"' in text
    assert '"seed": 5' in text


def test_full_export():
    gt = generate_star(10, 5, seed=1)
    ws = export_workspace(gt)
    assert len(ws.hosts) - 1 == 10
    for hid, h in gt.hosts.items():
        assert ws.hosts[hid].tcp_ports == h.tcp_ports
    assert ws.compromised == {(gt.attacker_host, PrivilegeLevel.HIGH)}
    assert gt.attacker_host in ws.networks[gt.entry_segment].member_hosts


def test_export_is_a_copy():
    gt = generate_star(10, 5, seed=1)
    ws = export_workspace(gt)
    ws.hosts["10.0.1.1"].tcp_ports.add(9999)
    assert 9999 not in gt.hosts["10.0.1.1"].tcp_ports


def test_partial_visibility_not_supported():
    with pytest.raises(ValueError):
        export_workspace(generate_star(10, 5, seed=1), "none")


def test_pick_goal_hosts():
    cat = generate_synthetic_catalog(60, 6, seed=7)
    gt = generate_star(200, 5, seed=1, catalog=cat)
    goals = pick_goal_hosts(gt, 100, seed=1, catalog=cat)
    assert len(set(goals)) == 100
    assert gt.attacker_host not in goals
    assert not set(goals) & gt.gateways()
    assert goals == pick_goal_hosts(gt, 100, seed=1, catalog=cat)


@settings(max_examples=15, deadline=None)
@given(st.integers(5, 80), st.integers(1, 6), st.integers(0, 10**6))
def test_star_invariants(n, subnets, seed):
    if n < subnets:
        return
    gt = generate_star(n, subnets, seed=seed)
    gt.validate()
    hops = gt.hops_from_entry()
    assert all(v <= 1 for v in hops.values())
    assert save_workspace(export_workspace(gt)) == save_workspace(export_workspace(gt))
