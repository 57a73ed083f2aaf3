"""Parser for the PDDL subset produced by :mod:`attackplan.transform`.

Accepted: typed parameters, conjunctive preconditions with at most one level
of ``exists``, positive add effects, one ``(increase (f) n)`` per action,
``(= (f) n)`` in init and ``(:metric minimize (f))``. Anything else is
rejected with :class:`UnsupportedConstruct`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator

SUPPORTED_REQUIREMENTS = frozenset(
    {":strips", ":typing", ":fluents", ":numeric-fluents", ":existential-preconditions", ":action-costs"}
)
UNSUPPORTED_KEYWORDS = frozenset({"not", "or", "imply", "forall", "when", "either", "decrease", "assign",
                                  "scale-up", "scale-down"})


class PddlError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line, self.col = line, col
        where = f"line {line}, column {col}: " if line is not None else ""
        super().__init__(where + message)


class PddlSyntaxError(PddlError):
    pass


class UnsupportedConstruct(PddlError):
    pass


class PddlSemanticError(PddlError):
    """Undeclared symbols, arity or type mismatches."""


# ---------------------------------------------------------------------------
# s-expressions


class Sym(str):
    """A token carrying its source position."""

    line: int
    col: int

    def __new__(cls, text: str, line: int, col: int) -> "Sym":
        s = super().__new__(cls, text)
        s.line, s.col = line, col
        return s


class SList(list):
    line: int = 0
    col: int = 0


_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")


def _tokens(text: str) -> Iterator[Sym]:
    line, line_start = 1, 0
    for m in _TOKEN.finditer(text):
        tok = m.group()
        col = m.start() - line_start + 1
        if tok[0].isspace() or tok[0] == ";":
            nl = tok.count("\n")
            if nl:
                line += nl
                line_start = m.start() + tok.rindex("\n") + 1
            continue
        yield Sym(tok, line, col)


def parse_sexpr(text: str) -> SList:
    """Parse a single top-level s-expression."""
    stack: list[SList] = []
    result: SList | None = None
    for tok in _tokens(text):
        if result is not None:
            raise PddlSyntaxError("unexpected text after the top-level expression", tok.line, tok.col)
        if tok == "(":
            node = SList()
            node.line, node.col = tok.line, tok.col
            stack.append(node)
        elif tok == ")":
            if not stack:
                raise PddlSyntaxError("unbalanced ')'", tok.line, tok.col)
            node = stack.pop()
            if stack:
                stack[-1].append(node)
            else:
                result = node
        else:
            if not stack:
                raise PddlSyntaxError(f"unexpected token {tok!r} outside parentheses", tok.line, tok.col)
            stack[-1].append(tok)
    if stack:
        raise PddlSyntaxError("unexpected end of input: missing ')'", stack[-1].line, stack[-1].col)
    if result is None:
        raise PddlSyntaxError("empty input", 1, 1)
    return result


def _pos(x) -> tuple[int | None, int | None]:
    return getattr(x, "line", None), getattr(x, "col", None)


def _kw(x) -> str | None:
    return x.lower() if isinstance(x, str) else None


# ---------------------------------------------------------------------------
# structures

Atom = tuple[str, tuple[str, ...]]  # predicate, arguments (variables start with "?")


@dataclass(frozen=True)
class Exists:
    variables: tuple[tuple[str, str], ...]
    atoms: tuple[Atom, ...]


@dataclass(frozen=True)
class ActionSchema:
    name: str
    parameters: tuple[tuple[str, str], ...]
    precondition: tuple[Atom, ...]
    exists: tuple[Exists, ...]
    add: tuple[Atom, ...]
    cost: float = 0.0
    fluent: str | None = None
    pos: tuple[int | None, int | None] = field(default=(None, None), compare=False, repr=False)


@dataclass
class Domain:
    name: str
    requirements: tuple[str, ...]
    types: dict[str, str]  # type -> parent
    predicates: dict[str, tuple[str, ...]]
    functions: tuple[str, ...]
    constants: dict[str, str]
    actions: list[ActionSchema]

    def action(self, name: str) -> ActionSchema:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)

    def is_subtype(self, t: str, of: str) -> bool:
        if of == "object":
            return True
        seen = set()
        while t is not None and t not in seen:
            if t == of:
                return True
            seen.add(t)
            t = self.types.get(t)
        return False


@dataclass
class Problem:
    name: str
    domain_name: str
    objects: dict[str, str]
    init: set[Atom]
    fluents: dict[str, float]
    goal: tuple[Atom, ...]
    metric: tuple[str, str] | None


@dataclass
class Task:
    domain: Domain
    problem: Problem
    objects: dict[str, str] = field(default_factory=dict)  # constants and problem objects

    def objects_of_type(self, t: str) -> list[str]:
        return sorted(o for o, ot in self.objects.items() if self.domain.is_subtype(ot, t))

    @property
    def cost_fluent(self) -> str | None:
        return self.problem.metric[1] if self.problem.metric else None


# ---------------------------------------------------------------------------
# parsing helpers


def _typed_list(items: list, where: str) -> list[tuple[str, str]]:
    """``a b - t c - u`` -> [(a, t), (b, t), (c, u)]; untyped names get ``object``."""
    out: list[tuple[str, str]] = []
    pending: list[str] = []
    i = 0
    while i < len(items):
        x = items[i]
        if isinstance(x, list):
            raise PddlSyntaxError(f"unexpected list in {where}", *_pos(x))
        if x == "-":
            if i + 1 >= len(items):
                raise PddlSyntaxError(f"missing type after '-' in {where}", *_pos(x))
            t = items[i + 1]
            if isinstance(t, list):
                if t and _kw(t[0]) == "either":
                    raise UnsupportedConstruct("'either' types are not supported", *_pos(t))
                raise PddlSyntaxError(f"bad type in {where}", *_pos(t))
            out.extend((p, str(t)) for p in pending)
            pending = []
            i += 2
            continue
        pending.append(str(x))
        i += 1
    out.extend((p, "object") for p in pending)
    return out


def _check_unsupported(x) -> None:
    if isinstance(x, list) and x and _kw(x[0]) in UNSUPPORTED_KEYWORDS:
        raise UnsupportedConstruct(f"'{x[0]}' is outside the supported subset", *_pos(x))


def _atom(x) -> Atom:
    _check_unsupported(x)
    if not isinstance(x, list) or not x or isinstance(x[0], list):
        raise PddlSyntaxError("expected an atom", *_pos(x))
    if any(isinstance(a, list) for a in x[1:]):
        raise UnsupportedConstruct("nested terms are not supported", *_pos(x))
    return str(x[0]), tuple(str(a) for a in x[1:])


def _conjuncts(x) -> list:
    """Flatten nested ``and``."""
    _check_unsupported(x)
    if isinstance(x, list) and x and _kw(x[0]) == "and":
        out = []
        for y in x[1:]:
            out.extend(_conjuncts(y))
        return out
    return [x]


def _precondition(x) -> tuple[list[Atom], list[Exists]]:
    atoms: list[Atom] = []
    exists: list[Exists] = []
    if isinstance(x, list) and not x:
        return atoms, exists
    for c in _conjuncts(x):
        if isinstance(c, list) and c and _kw(c[0]) == "exists":
            if len(c) != 3 or not isinstance(c[1], list):
                raise PddlSyntaxError("malformed exists", *_pos(c))
            inner = []
            for y in _conjuncts(c[2]):
                if isinstance(y, list) and y and _kw(y[0]) == "exists":
                    raise UnsupportedConstruct("nested exists is not supported", *_pos(y))
                inner.append(_atom(y))
            exists.append(Exists(tuple(_typed_list(list(c[1]), "exists")), tuple(inner)))
        else:
            atoms.append(_atom(c))
    return atoms, exists


def _number(x) -> float:
    try:
        return float(x)
    except (TypeError, ValueError):
        raise UnsupportedConstruct(f"expected a number, got {x!r}", *_pos(x)) from None


def _effect(x) -> tuple[list[Atom], list[tuple[str, float]]]:
    adds: list[Atom] = []
    incs: list[tuple[str, float]] = []
    for c in _conjuncts(x):
        if isinstance(c, list) and c and _kw(c[0]) == "increase":
            if len(c) != 3 or not isinstance(c[1], list) or len(c[1]) != 1:
                raise UnsupportedConstruct("only (increase (f) <number>) is supported", *_pos(c))
            incs.append((str(c[1][0]), _number(c[2])))
        else:
            adds.append(_atom(c))
    return adds, incs


def _sections(doc: list, head: str) -> tuple[str, list]:
    if len(doc) < 2 or _kw(doc[0]) != "define" or not isinstance(doc[1], list) or len(doc[1]) != 2:
        raise PddlSyntaxError("expected (define (<kind> <name>) ...)", *_pos(doc))
    if _kw(doc[1][0]) != head:
        raise PddlSyntaxError(f"expected a {head} definition", *_pos(doc[1]))
    for s in doc[2:]:
        if not isinstance(s, list) or not s or not isinstance(s[0], str) or not s[0].startswith(":"):
            raise PddlSyntaxError("expected a (:section ...)", *_pos(s))
    return str(doc[1][1]), doc[2:]


# ---------------------------------------------------------------------------
# domain / problem


def parse_domain(text: str) -> Domain:
    name, sections = _sections(parse_sexpr(text), "domain")
    dom = Domain(name, (), {}, {}, (), {}, [])
    for s in sections:
        key = s[0].lower()
        if key == ":requirements":
            reqs = tuple(str(r).lower() for r in s[1:])
            for r, tok in zip(reqs, s[1:]):
                if r not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedConstruct(f"requirement {r} is not supported", *_pos(tok))
            dom.requirements = reqs
        elif key == ":types":
            for t, parent in _typed_list(list(s[1:]), ":types"):
                dom.types[t] = parent
        elif key == ":predicates":
            for p in s[1:]:
                if not isinstance(p, list) or not p:
                    raise PddlSyntaxError("bad predicate declaration", *_pos(p))
                dom.predicates[str(p[0])] = tuple(t for _, t in _typed_list(list(p[1:]), str(p[0])))
        elif key == ":functions":
            fs = []
            for f in s[1:]:
                if isinstance(f, list):
                    if len(f) != 1:
                        raise UnsupportedConstruct("only 0-ary functions are supported", *_pos(f))
                    fs.append(str(f[0]))
                elif f == "-":
                    break  # "- number" type annotation
            dom.functions = tuple(fs)
        elif key == ":constants":
            for c, t in _typed_list(list(s[1:]), ":constants"):
                dom.constants[c] = t
        elif key == ":action":
            dom.actions.append(_action(s))
        else:
            raise UnsupportedConstruct(f"section {s[0]} is not supported", *_pos(s))
    _check_domain(dom)
    return dom


def _action(s: list) -> ActionSchema:
    if len(s) < 2 or not isinstance(s[1], str):
        raise PddlSyntaxError("action without a name", *_pos(s))
    name = str(s[1])
    params: list[tuple[str, str]] = []
    pre: list[Atom] = []
    ex: list[Exists] = []
    adds: list[Atom] = []
    incs: list[tuple[str, float]] = []
    i = 2
    while i < len(s):
        key = _kw(s[i])
        if i + 1 >= len(s):
            raise PddlSyntaxError(f"missing value for {s[i]}", *_pos(s[i]))
        val = s[i + 1]
        if key == ":parameters":
            params = _typed_list(list(val), name)
        elif key == ":precondition":
            pre, ex = _precondition(val)
        elif key == ":effect":
            adds, incs = _effect(val)
        else:
            raise UnsupportedConstruct(f"action field {s[i]} is not supported", *_pos(s[i]))
        i += 2
    if len(incs) > 1:
        raise UnsupportedConstruct(f"action {name}: more than one increase effect", *_pos(s))
    cost = incs[0][1] if incs else 0.0
    if cost < 0:
        raise UnsupportedConstruct(f"action {name}: negative cost", *_pos(s))
    fluent = incs[0][0] if incs else None
    return ActionSchema(name, tuple(params), tuple(pre), tuple(ex), tuple(adds), cost, fluent, _pos(s))


def _check_atom(dom: Domain, atom: Atom, scope: dict[str, str], where: str, pos) -> None:
    pred, args = atom
    if pred not in dom.predicates:
        raise PddlSemanticError(f"{where}: undeclared predicate {pred}", *pos)
    sig = dom.predicates[pred]
    if len(sig) != len(args):
        raise PddlSemanticError(f"{where}: {pred} expects {len(sig)} arguments, got {len(args)}", *pos)
    for a, t in zip(args, sig):
        if a.startswith("?"):
            if a not in scope:
                raise PddlSemanticError(f"{where}: unbound variable {a}", *pos)
            at = scope[a]
        elif a in dom.constants:
            at = dom.constants[a]
        else:
            raise PddlSemanticError(f"{where}: undeclared constant {a}", *pos)
        if not dom.is_subtype(at, t):
            raise PddlSemanticError(f"{where}: {a} has type {at}, {pred} expects {t}", *pos)


def _check_domain(dom: Domain) -> None:
    known = set(dom.types) | {"object"}
    for t, parent in dom.types.items():
        if parent not in known:
            raise PddlSemanticError(f"type {t}: unknown parent type {parent}")
    for pred, sig in dom.predicates.items():
        for t in sig:
            if t not in known:
                raise PddlSemanticError(f"predicate {pred}: unknown type {t}")
    for c, t in dom.constants.items():
        if t not in known:
            raise PddlSemanticError(f"constant {c}: unknown type {t}")
    names = set()
    for a in dom.actions:
        pos = a.pos
        if a.name in names:
            raise PddlSemanticError(f"duplicate action {a.name}", *pos)
        names.add(a.name)
        scope = {}
        for v, t in a.parameters:
            if t not in known:
                raise PddlSemanticError(f"action {a.name}: unknown type {t}", *pos)
            scope[v] = t
        for atom in a.precondition + a.add:
            _check_atom(dom, atom, scope, f"action {a.name}", pos)
        for e in a.exists:
            inner = dict(scope)
            inner.update(e.variables)
            for atom in e.atoms:
                _check_atom(dom, atom, inner, f"action {a.name}", pos)
        if a.fluent is not None and a.fluent not in dom.functions:
            raise PddlSemanticError(f"action {a.name}: undeclared function {a.fluent}", *pos)


def parse_problem(text: str, domain: Domain) -> Problem:
    name, sections = _sections(parse_sexpr(text), "problem")
    prob = Problem(name, "", {}, set(), {}, (), None)
    for s in sections:
        key = s[0].lower()
        if key == ":domain":
            prob.domain_name = str(s[1])
            if prob.domain_name != domain.name:
                raise PddlSemanticError(f"problem is for domain {prob.domain_name}, not {domain.name}", *_pos(s))
        elif key == ":objects":
            for o, t in _typed_list(list(s[1:]), ":objects"):
                if t not in domain.types and t != "object":
                    raise PddlSemanticError(f"object {o}: unknown type {t}", *_pos(s))
                prob.objects[o] = t
        elif key == ":init":
            for x in s[1:]:
                if isinstance(x, list) and x and x[0] == "=":
                    if len(x) != 3 or not isinstance(x[1], list) or len(x[1]) != 1:
                        raise UnsupportedConstruct("only (= (f) <number>) is supported in init", *_pos(x))
                    prob.fluents[str(x[1][0])] = _number(x[2])
                else:
                    prob.init.add(_atom(x))
        elif key == ":goal":
            prob.goal = tuple(_atom(g) for g in _conjuncts(s[1]))
        elif key == ":metric":
            if len(s) != 3 or _kw(s[1]) != "minimize" or not isinstance(s[2], list) or len(s[2]) != 1:
                raise UnsupportedConstruct("only (:metric minimize (f)) is supported", *_pos(s))
            prob.metric = ("minimize", str(s[2][0]))
        else:
            raise UnsupportedConstruct(f"section {s[0]} is not supported", *_pos(s))
    return prob


def _check_problem(task: Task) -> None:
    dom, prob = task.domain, task.problem
    for atom in sorted(prob.init) + list(prob.goal):
        pred, args = atom
        if pred not in dom.predicates:
            raise PddlSemanticError(f"undeclared predicate {pred} in problem")
        sig = dom.predicates[pred]
        if len(sig) != len(args):
            raise PddlSemanticError(f"{pred} expects {len(sig)} arguments, got {len(args)}")
        for a, t in zip(args, sig):
            if a not in task.objects:
                raise PddlSemanticError(f"undeclared object {a} in ({pred} {' '.join(args)})")
            if not dom.is_subtype(task.objects[a], t):
                raise PddlSemanticError(f"{a} has type {task.objects[a]}, {pred} expects {t}")
    for f in prob.fluents:
        if f not in dom.functions:
            raise PddlSemanticError(f"undeclared function {f} in init")
    if prob.metric and prob.metric[1] not in dom.functions:
        raise PddlSemanticError(f"metric uses undeclared function {prob.metric[1]}")
    if prob.metric:
        for a in dom.actions:
            if a.fluent is not None and a.fluent != prob.metric[1]:
                raise UnsupportedConstruct(f"action {a.name} increases {a.fluent}, which is not the metric")


def parse(domain_text: str, problem_text: str) -> Task:
    domain = parse_domain(domain_text)
    problem = parse_problem(problem_text, domain)
    objects = dict(domain.constants)
    for o, t in problem.objects.items():
        if o in objects and objects[o] != t:
            raise PddlSemanticError(f"object {o} redeclared with type {t}")
        objects[o] = t
    task = Task(domain, problem, objects)
    _check_problem(task)
    return task


# ---------------------------------------------------------------------------
# normal form used to compare action definitions


_VARIANT = re.compile(r"__v[0-9]+\Z")


def normalize_action(a: ActionSchema) -> tuple:
    """Order- and naming-independent form of an action schema.

    Parameters are renamed by position, the variant suffix of exploit action
    names is dropped, and preconditions become sets.
    """
    ren = {v: f"?{i}" for i, (v, _) in enumerate(a.parameters)}

    def atom(at: Atom, r: dict[str, str]) -> Atom:
        return at[0], tuple(r.get(x, x) for x in at[1])

    exists = []
    for e in a.exists:
        r = dict(ren)
        r.update({v: f"?e{i}" for i, (v, _) in enumerate(e.variables)})
        exists.append((tuple(t for _, t in e.variables), frozenset(atom(x, r) for x in e.atoms)))
    return (
        _VARIANT.sub("", a.name),
        tuple(t for _, t in a.parameters),
        frozenset(atom(x, ren) for x in a.precondition),
        frozenset(exists),
        frozenset(atom(x, ren) for x in a.add),
        a.cost,
    )
