from __future__ import annotations

import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attackplan.exploitdb import (
    Catalog,
    Const,
    ExploitTemplate,
    generate_synthetic_catalog,
)
from attackplan.naming import IDENTIFIER, NameTable, sanitize
from attackplan.netmodel import (
    Host,
    OsFingerprint,
    PrivilegeLevel,
    ServiceBinding,
    add_host,
    new_workspace,
)
from attackplan.planner import parse
from attackplan.planner.render import render_plan, step_label
from attackplan.planner.search import Plan, PlanStep
from attackplan.scenario import export_workspace, generate_chain, generate_star
from attackplan.transform import (
    Goal,
    TransformOptions,
    UnregisteredConstantError,
    emit_domain,
    transform,
)

XP_SP2 = OsFingerprint(os="Windows", version="WinXp", edition="Professional", servicepack="Sp2", architecture="I386")


def two_host_workspace():
    ws = new_workspace(Host("localhost"), ["n0"])
    add_host(ws, Host("h2", XP_SP2, tcp_ports={445}, services={ServiceBinding("smb", 445)}), ["n0"])
    return ws


# -- sanitize / name table ---------------------------------------------------


def test_sanitize_ip():
    assert sanitize("10.0.1.1") == "h_10_0_1_1"


def test_sanitize_port():
    assert sanitize(5053) == "port5053"


def test_sanitize_keeps_legal_names():
    assert sanitize("WinXp") == "WinXp"


def test_sanitize_reserved_word():
    assert sanitize("and", "c") != "and"


def test_collisions_get_suffixes():
    names = NameTable()
    a = names.assign("host", "10.0.1.1", "h")
    b = names.assign("host", "10_0_1_1", "h")
    c = names.assign("host", "10-0-1-1", "h")
    assert a == "h_10_0_1_1"
    assert len({a.lower(), b.lower(), c.lower()}) == 3
    assert b == "h_10_0_1_1_2"
    assert names.original(b) == "10_0_1_1"


def test_collision_is_case_insensitive():
    names = NameTable()
    a = names.assign("operating_system", "Windows")
    b = names.assign("OS_edition", "windows")
    assert a.lower() != b.lower()


def test_tsv_round_trip():
    names = NameTable()
    names.assign("host", "10.0.1.1", "h")
    names.assign("port", 445)
    names.attacker = "localhost"
    names.assign("host", "localhost", "h")
    assert NameTable.from_tsv(names.to_tsv()) == names


@settings(max_examples=80, deadline=None)
@given(st.lists(st.text(st.characters(min_codepoint=33, max_codepoint=126), min_size=1, max_size=8), unique=True))
def test_name_table_injective_and_legal(ids):
    names = NameTable()
    out = [names.assign("host", i, "h") for i in ids]
    assert len({o.lower() for o in out}) == len(ids)
    assert all(IDENTIFIER.match(o) for o in out)
    assert [names.original(o) for o in out] == ids


# -- domain --------------------------------------------------------------------


def test_empty_catalog_domain_has_model_actions_only():
    domain = emit_domain(Catalog(), {})
    assert re.findall(r"\(:action (\S+)", domain) == ["IP_connect", "TCP_connect", "UDP_connect", "Mark_as_compromised"]


def test_udp_connect_optional():
    domain = emit_domain(Catalog(), {}, TransformOptions(emit_udp_connect=False))
    assert "(:action UDP_connect" not in domain


def test_hp_openview_action_text(hp_catalog):
    result = transform(two_host_workspace(), hp_catalog, Goal.compromise("h2"))
    block = result.domain.split("(:action HP_OpenView_Remote_Buffer_Overflow_Exploit__v1")[1].split("(:action")[0]
    assert "(has_service ?t ovtrcd)" in block
    assert "(TCP_connectivity ?s ?t port5053)" in block
    assert "(increase (time) 10)" in block
    assert "(installed_agent ?t high_privileges)" in block


def test_domain_types_and_predicates(hp_catalog):
    domain = transform(two_host_workspace(), hp_catalog, Goal.compromise("h2")).domain
    types = re.search(r"\(:types (.*?) - object\)", domain).group(1).split()
    assert types == ["network", "host", "port", "port_set", "application", "agent", "privileges",
                     "operating_system", "OS_version", "OS_edition", "OS_build", "OS_servicepack",
                     "OS_distro", "kernel_version", "OS_architecture"]
    for pred in ("has_service", "compromised", "installed_agent", "UDP_connectivity", "has_application"):
        assert f"({pred} " in domain
    assert ":requirements :typing :fluents" in domain


def test_constants_sorted_and_complete(hp_catalog):
    domain = transform(two_host_workspace(), hp_catalog, Goal.compromise("h2")).domain
    block = domain.split("(:constants")[1]
    lines = [ln.split(" - ") for ln in block.strip().rstrip(")").splitlines() if " - " in ln]
    for names, _ in lines:
        items = names.split()
        assert items == sorted(items)
    flat = {n for names, _ in lines for n in names.split()}
    assert {"Solaris", "V_10", "Sun4U", "ovtrcd", "port5053", "port445", "localagent", "high_privileges"} <= flat


def test_unregistered_constant():
    ex = ExploitTemplate("weird", (OsFingerprint(os="Plan9"),), 9)
    names = NameTable()
    with pytest.raises(UnregisteredConstantError):
        emit_domain(Catalog((ex,)), {"operating_system": ["Windows"], "port": [9]}, names=names)


def test_large_catalog_domain():
    cat = generate_synthetic_catalog(300, 6, seed=7)
    domain = transform(export_workspace(generate_star(10, 5, seed=1, catalog=cat)), cat, Goal.compromise("10.0.1.1")).domain
    assert domain.count("(:action ") == 1804
    assert domain.count("\n") > 10_000


# -- problem -------------------------------------------------------------------


def test_smallest_problem(hp_catalog):
    problem = transform(two_host_workspace(), hp_catalog, Goal.compromise("h2")).problem
    assert re.search(r"\(:goal\s*\(and\s*\(compromised h2\)\s*\)\)", problem)
    assert "(:metric minimize (time))" in problem
    assert "(= (time) 0)" in problem
    assert "(installed_agent localhost high_privileges)" in problem


def test_problem_init_facts():
    ws = two_host_workspace()
    ws.hosts["h2"].applications.add("office")
    ws.register("application", "office")
    problem = transform(ws, Catalog(), Goal.compromise("h2")).problem
    for atom in ("(connected_to_network h2 n0)", "(TCP_listen_port h2 port445)", "(has_OS h2 Windows)",
                 "(has_OS_servicepack h2 Sp2)", "(has_service h2 smb)", "(has_application h2 office)"):
        assert atom in problem


def test_privileged_goal():
    problem = transform(two_host_workspace(), Catalog(), Goal.parse(["h2:low_privileges"])).problem
    assert "(installed_agent h2 low_privileges)" in problem.split("(:goal")[1]


def test_hundred_goals():
    cat = generate_synthetic_catalog(40, 6, seed=1)
    gt = generate_star(200, 5, seed=1, catalog=cat)
    hosts = sorted(h for h in gt.hosts if h != gt.attacker_host)[:100]
    problem = transform(export_workspace(gt), cat, Goal.compromise(*hosts)).problem
    assert problem.split("(:goal")[1].count("(compromised ") == 100


def test_sanitized_port_atom(chain_task):
    result, _ = chain_task
    assert "(TCP_listen_port h_10_0_5_12 port445)" in result.problem


def test_connectivity_hint_becomes_init_atom():
    ws = two_host_workspace()
    ws.add_network("n1")
    add_host(ws, Host("h3"), ["n1"])
    ws.connectivity_hints.add(("h2", "h3"))
    problem = transform(ws, Catalog(), Goal.compromise("h3")).problem
    assert "(IP_connectivity h2 h3)" in problem


def test_unknown_goal_host():
    with pytest.raises(ValueError, match="nowhere"):
        transform(two_host_workspace(), Catalog(), Goal.compromise("nowhere"))


def test_empty_goal():
    with pytest.raises(ValueError):
        Goal(())


def test_sanitizing_disabled_rejects_ips(hp_catalog):
    ws = new_workspace(Host("localhost"), ["n0"])
    add_host(ws, Host("10.0.1.1"), ["n0"])
    with pytest.raises(ValueError):
        transform(ws, hp_catalog, Goal.compromise("10.0.1.1"), TransformOptions(sanitize_identifiers=False))


def test_bad_metric_name():
    with pytest.raises(ValueError):
        TransformOptions(metric_name="total time")


# -- determinism and self-consistency -------------------------------------------


def test_byte_identical_output(chain_gt, chain_catalog):
    goal = Goal.compromise("10.0.5.12")
    a = transform(export_workspace(chain_gt), chain_catalog, goal)
    b = transform(export_workspace(chain_gt), chain_catalog, goal)
    assert (a.domain, a.problem, a.mapping) == (b.domain, b.problem, b.mapping)


def test_output_format_conventions(chain_task):
    result, _ = chain_task
    for text in (result.domain, result.problem):
        assert text.isascii()
        assert "\r" not in text and "\t" not in text
        assert "(define" in text and "(DEFINE" not in text


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["star", "chain"]))
def test_emitted_pddl_parses(seed, topology):
    cat = generate_synthetic_catalog(20, 4, seed=seed)
    if topology == "star":
        gt = generate_star(15, 3, seed=seed, catalog=cat)
    else:
        gt = generate_chain(2, 2, seed=seed, catalog=cat)
    result = transform(export_workspace(gt), cat, Goal.compromise(*gt.targets))
    task = parse(result.domain, result.problem)
    # every init atom and goal atom uses declared predicates and objects
    assert task.problem.init
    restored = NameTable.from_tsv(result.mapping)
    for host in gt.hosts:
        assert restored.original(restored.name("host", host)) == host


def test_render_desanitizes(chain_task):
    result, _ = chain_task
    names = result.names
    step = PlanStep("IP_connect", ("localhost", names.name("host", "10.0.1.1")), 0.0)
    assert step_label(step, names) == "IP_connect localhost 10.0.1.1"


def test_render_attacker_mark(chain_task):
    result, _ = chain_task
    plan = Plan([PlanStep("Mark_as_compromised", ("localhost", "high_privileges"), 0.0)])
    assert render_plan(plan, result.names).splitlines() == [
        "0: Mark_as_compromised localagent localhost",
        "total-time: 0",
    ]


def test_render_empty_plan():
    assert render_plan(Plan([])) == "total-time: 0\n"


def test_goal_parse_syntax():
    g = Goal.parse(["10.0.5.12", "10.0.1.1:high_privileges"])
    assert g.targets == (("10.0.5.12", None), ("10.0.1.1", PrivilegeLevel.HIGH))
    assert g.hosts() == ["10.0.5.12", "10.0.1.1"]


def test_const_kinds_are_types():
    # constants carry the PDDL type they are emitted under
    assert Const("port", 445).kind == "port"
