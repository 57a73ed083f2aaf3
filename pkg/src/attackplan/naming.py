"""PDDL identifier sanitization and the sanitized <-> original name table."""

from __future__ import annotations

import csv
import io
import re
import string
from typing import Iterable

IDENTIFIER = re.compile(r"[A-Za-z][A-Za-z0-9_-]*\Z")

# Words a planner's lexer may treat specially; never emitted as object names.
RESERVED = frozenset(
    {
        "and", "or", "not", "imply", "exists", "forall", "when", "either", "object",
        "define", "domain", "problem", "increase", "decrease", "assign", "number",
        "minimize", "maximize", "total-time", "preference",
    }
)

_BAD_CHARS = re.compile(r"[^A-Za-z0-9_-]")


def sanitize(identifier: str | int, prefix: str = "h") -> str:
    """Map ``identifier`` to a legal PDDL name.

    Integers are ports and become ``port<N>``. Strings have illegal
    characters replaced by ``_`` and get ``<prefix>_`` prepended when they
    do not start with a letter or clash with a reserved word.
    """
    if isinstance(identifier, int) and not isinstance(identifier, bool):
        return f"port{identifier}"
    text = str(identifier)
    if not text:
        raise ValueError("cannot sanitize an empty identifier")
    out = _BAD_CHARS.sub("_", text)
    if out[0] not in string.ascii_letters or out.lower() in RESERVED:
        out = f"{prefix}_{out}"
    return out


def is_identifier(name: str) -> bool:
    return bool(IDENTIFIER.match(name)) and name.lower() not in RESERVED


class NameTable:
    """Injective mapping between original ids and emitted PDDL names.

    Objects and constants share one namespace, exploit ids (which become
    action names) another. Uniqueness
    is checked case-insensitively because PDDL names are. A collision gets a
    numeric suffix (``_2``, ``_3``, ...) in insertion order, so the table is
    deterministic as long as callers insert in a deterministic order.
    """

    def __init__(self, sanitize_identifiers: bool = True):
        self.sanitize_identifiers = sanitize_identifiers
        self.attacker: str | None = None
        self._forward: dict[tuple[str, str], str] = {}
        self._backward: dict[str, tuple[str, str]] = {}
        self._used: dict[str, set[str]] = {"object": set(), "action": set()}

    @staticmethod
    def _namespace(kind: str) -> str:
        return "action" if kind == "exploit" else "object"

    def reserve(self, name: str, namespace: str = "object") -> None:
        self._used[namespace].add(name.lower())

    def assign(self, kind: str, original: str | int, prefix: str = "c", name: str | None = None) -> str:
        """Return the PDDL name for ``(kind, original)``, creating it if needed.

        ``name`` forces the base name (used for action names derived from
        catalog ids); otherwise it is derived by :func:`sanitize`.
        """
        key = (kind, str(original))
        if key in self._forward:
            return self._forward[key]
        if name is not None:
            base = name
        elif self.sanitize_identifiers:
            base = sanitize(original, prefix)
        else:
            base = f"port{original}" if isinstance(original, int) else str(original)
            if not is_identifier(base):
                raise ValueError(f"{original!r} is not a legal PDDL identifier (sanitization disabled)")
        used = self._used[self._namespace(kind)]
        candidate, n = base, 2
        while candidate.lower() in used:
            candidate = f"{base}_{n}"
            n += 1
        used.add(candidate.lower())
        self._forward[key] = candidate
        self._backward[candidate] = key
        return candidate

    def name(self, kind: str, original: str | int) -> str:
        return self._forward[(kind, str(original))]

    def get(self, kind: str, original: str | int) -> str | None:
        return self._forward.get((kind, str(original)))

    def lookup(self, sanitized: str) -> tuple[str, str] | None:
        """``(kind, original)`` for an emitted name, or ``None``."""
        return self._backward.get(sanitized)

    def original(self, sanitized: str) -> str:
        entry = self._backward.get(sanitized)
        return entry[1] if entry else sanitized

    def entries(self) -> Iterable[tuple[str, str, str]]:
        for (kind, original), name in self._forward.items():
            yield kind, name, original

    def __len__(self) -> int:
        return len(self._forward)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NameTable):
            return NotImplemented
        return self._forward == other._forward and self.attacker == other.attacker

    def to_tsv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, delimiter="\t", lineterminator="\n")
        w.writerow(["kind", "sanitized", "original"])
        if self.attacker is not None:
            w.writerow(["attacker", self.name("host", self.attacker), self.attacker])
        for kind, name, original in self.entries():
            w.writerow([kind, name, original])
        return buf.getvalue()

    @classmethod
    def from_tsv(cls, text: str) -> "NameTable":
        table = cls()
        rows = list(csv.reader(io.StringIO(text), delimiter="\t"))
        if not rows or rows[0] != ["kind", "sanitized", "original"]:
            raise ValueError("mapping file must start with the header 'kind<TAB>sanitized<TAB>original'")
        attacker = None
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != 3:
                raise ValueError(f"mapping line {lineno}: expected 3 columns, got {len(row)}")
            kind, name, original = row
            if kind == "attacker":
                attacker = original
                continue
            table.assign(kind, original, name=name)
        table.attacker = attacker
        return table
