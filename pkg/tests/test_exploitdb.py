from __future__ import annotations

import json

import pytest
from conftest import fixture_text
from hypothesis import given, settings
from hypothesis import strategies as st

from attackplan.exploitdb import (
    Catalog,
    CatalogError,
    ExploitTemplate,
    expand_variants,
    generate_synthetic_catalog,
    is_exploitable,
    load_catalog,
    save_catalog,
)
from attackplan.netmodel import (
    Host,
    OsFingerprint,
    PrivilegeLevel,
    SchemaError,
    ServiceBinding,
)
from attackplan.scenario import MACHINE_PROFILES
from attackplan.transform import PREDICATES, TYPES

XP_SP2 = OsFingerprint(os="Windows", version="WinXp", edition="Professional", servicepack="Sp2", architecture="I386")


def test_hp_openview_catalog(hp_catalog):
    assert len(hp_catalog) == 1
    e = hp_catalog["HP_OpenView_Remote_Buffer_Overflow_Exploit"]
    assert [v.os for v in e.variants] == ["Windows", "Solaris"]
    assert e.variants[0] == XP_SP2
    assert e.variants[1] == OsFingerprint(os="Solaris", version="V_10", architecture="Sun4U")
    assert (e.required_port, e.protocol, e.required_service, e.avg_runtime) == (5053, "tcp", "ovtrcd", 10)
    assert e.result_privilege is PrivilegeLevel.HIGH


def test_empty_catalog():
    assert len(load_catalog('{"format": 1, "exploits": []}')) == 0


def test_duplicate_id_rejected():
    doc = json.loads(fixture_text("hp_openview_catalog.json"))
    doc["exploits"].append(doc["exploits"][0])
    with pytest.raises(SchemaError, match="duplicate"):
        load_catalog(json.dumps(doc))


def test_ids_colliding_after_sanitizing_rejected():
    a = ExploitTemplate("ms08 067", (XP_SP2,), 445)
    b = ExploitTemplate("MS08_067", (XP_SP2,), 445)
    with pytest.raises(CatalogError):
        Catalog((a, b))


def test_empty_variant_rejected():
    doc = json.loads(fixture_text("hp_openview_catalog.json"))
    doc["exploits"][0]["variants"].append({})
    with pytest.raises(SchemaError, match="variant"):
        load_catalog(json.dumps(doc))


def test_variant_suffix_id_rejected():
    with pytest.raises(CatalogError):
        Catalog((ExploitTemplate("foo__v2", (XP_SP2,), 445),))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"variants": ()},
        {"avg_runtime": -1.0},
        {"required_port": None},
        {"required_port": 70000},
        {"protocol": "icmp"},
        {"kind": "client"},
    ],
)
def test_template_invariants(kwargs):
    base = {"id": "x", "variants": (XP_SP2,), "required_port": 445}
    with pytest.raises(CatalogError):
        ExploitTemplate(**{**base, **kwargs})


def test_save_load_round_trip(hp_catalog, chain_catalog):
    for cat in (hp_catalog, chain_catalog):
        assert load_catalog(save_catalog(cat)) == cat


def test_expand_hp_openview(hp_catalog):
    templates = expand_variants(hp_catalog)
    assert [t.name for t in templates] == [
        "HP_OpenView_Remote_Buffer_Overflow_Exploit__v1",
        "HP_OpenView_Remote_Buffer_Overflow_Exploit__v2",
    ]
    preds = {p for p, _ in templates[0].atoms()}
    assert {"compromised", "has_service", "TCP_connectivity", "has_OS", "has_architecture"} <= preds
    assert templates[0].cost == 10


def test_no_service_atom_without_requirement():
    cat = Catalog((ExploitTemplate("plain", (OsFingerprint(os="Linux"),), 22),))
    (t,) = expand_variants(cat)
    preds = [p for p, _ in t.atoms()]
    assert "has_service" not in preds
    assert preds.count("has_OS") == 1
    assert not any(p.startswith("has_OS_") for p in preds)


def test_local_template_shape():
    cat = Catalog((ExploitTemplate("esc", (OsFingerprint(os="Linux"),), kind="local", avg_runtime=3),))
    (t,) = expand_variants(cat)
    preds = {p for p, _ in t.precondition + t.fingerprint_atoms}
    assert "installed_agent" in preds
    assert not {"compromised", "TCP_connectivity", "UDP_connectivity"} & preds
    assert t.effect[0] == "installed_agent"


def test_udp_template_uses_udp_connectivity():
    cat = Catalog((ExploitTemplate("snmp", (OsFingerprint(os="Linux"),), 161, "udp"),))
    (t,) = expand_variants(cat)
    assert "UDP_connectivity" in {p for p, _ in t.precondition}


@pytest.mark.parametrize("n, expected", [(120, 720), (240, 1440), (300, 1800)])
def test_synthetic_template_counts(n, expected):
    assert len(expand_variants(generate_synthetic_catalog(n, 6, seed=7))) == expected


def test_synthetic_deterministic():
    a = save_catalog(generate_synthetic_catalog(50, 6, seed=3))
    b = save_catalog(generate_synthetic_catalog(50, 6, seed=3))
    assert a == b
    assert a != save_catalog(generate_synthetic_catalog(50, 6, seed=4))


def test_synthetic_exactly_one_matching_variant():
    cat = generate_synthetic_catalog(60, 6, seed=7)
    machine_fps = [fp for p in MACHINE_PROFILES for fp in p.fingerprints()]
    for e in cat:
        matching = [v for v in e.variants if any(fp.satisfies(v) for fp in machine_fps)]
        assert len(matching) == 1, e.id


def test_synthetic_empty_pools():
    with pytest.raises(CatalogError):
        generate_synthetic_catalog(5, 6, seed=1, port_pool=[])
    with pytest.raises(CatalogError):
        generate_synthetic_catalog(5, 6, seed=1, os_pool=[])
    with pytest.raises(CatalogError):
        generate_synthetic_catalog(0)


def test_is_exploitable(hp_catalog):
    vulnerable = Host("a", XP_SP2, tcp_ports={5053}, services={ServiceBinding("ovtrcd", 5053)})
    no_service = Host("b", XP_SP2, tcp_ports={5053})
    wrong_os = Host("c", OsFingerprint(os="Linux"), tcp_ports={5053}, services={ServiceBinding("ovtrcd", 5053)})
    assert is_exploitable(vulnerable, hp_catalog)
    assert not is_exploitable(no_service, hp_catalog)
    assert not is_exploitable(wrong_os, hp_catalog)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 8), st.integers(0, 1000))
def test_expansion_count_and_vocabulary(n, k, seed):
    cat = generate_synthetic_catalog(n, k, seed=seed)
    templates = expand_variants(cat)
    assert len(templates) == sum(len(e.variants) for e in cat)
    declared = {p for p, _ in PREDICATES}
    for t in templates:
        for pred, args in t.atoms():
            assert pred in declared
            for a in args:
                if not isinstance(a, str):
                    assert a.kind in TYPES
