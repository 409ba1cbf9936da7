"""Query model: parsing, printing, and the hypergraph view.

A query is a natural join ``Q(attrs) :- R1(vars), ..., Rm(vars).`` with at
least two atoms. The output schema is always the union of the atom schemas in
first-appearance order; a written head is parsed but does not narrow it.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from importlib import resources

from .errors import QueryParseError

_TOKEN = re.compile(r"\s*([A-Za-z][A-Za-z0-9_]*|[(),.]|:-)")


@dataclass(frozen=True)
class Atom:
    name: str
    vars: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        if len(set(self.vars)) != len(self.vars):
            raise QueryParseError(
                f"atom {self.name} repeats a variable: {self.vars}"
            )

    @property
    def var_set(self) -> frozenset[str]:
        return frozenset(self.vars)

    def __str__(self) -> str:
        return f"{self.name}({','.join(self.vars)})"


@dataclass(frozen=True)
class QuerySpec:
    name: str
    atoms: tuple[Atom, ...]
    attrs: tuple[str, ...]  # union of atom vars, first-appearance order

    @classmethod
    def make(cls, name: str, atoms) -> "QuerySpec":
        atoms = tuple(atoms)
        if len(atoms) < 2:
            raise QueryParseError("a join query needs at least 2 atoms")
        names = [a.name for a in atoms]
        if len(set(names)) != len(names):
            # blocks and bindings are keyed by atom name; self-joins use
            # distinct atom names bound to the same table
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise QueryParseError(f"duplicate atom names: {dupes}")
        seen: list[str] = []
        for atom in atoms:
            for v in atom.vars:
                if v not in seen:
                    seen.append(v)
        return cls(name, atoms, tuple(seen))

    def attr_index(self, attr: str) -> int:
        return self.attrs.index(attr)

    def __str__(self) -> str:
        return format_query(self)


def tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise QueryParseError(f"unexpected character at offset {pos}: {text[pos]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


def parse_query(text: str) -> QuerySpec:
    """Parse ``Name(v1,...) :- A1(...), ..., Am(...).`` (whitespace-free form
    accepted too). The trailing period is required."""
    tokens = tokenize(text)
    pos = 0

    def expect(tok):
        nonlocal pos
        if pos >= len(tokens) or tokens[pos] != tok:
            got = tokens[pos] if pos < len(tokens) else "end of input"
            raise QueryParseError(f"expected {tok!r}, got {got!r}")
        pos += 1

    def ident():
        nonlocal pos
        if pos >= len(tokens) or not re.fullmatch(r"[A-Za-z][A-Za-z0-9_]*", tokens[pos]):
            got = tokens[pos] if pos < len(tokens) else "end of input"
            raise QueryParseError(f"expected identifier, got {got!r}")
        pos += 1
        return tokens[pos - 1]

    def var_list():
        expect("(")
        vs = [ident()]
        while pos < len(tokens) and tokens[pos] == ",":
            expect(",")
            vs.append(ident())
        expect(")")
        return tuple(vs)

    name = ident()
    var_list()  # head variables; the real schema is recomputed below
    expect(":-")
    atoms = [Atom(ident(), var_list())]
    while pos < len(tokens) and tokens[pos] == ",":
        expect(",")
        atoms.append(Atom(ident(), var_list()))
    expect(".")
    if pos != len(tokens):
        raise QueryParseError(f"trailing tokens after '.': {tokens[pos:]}")
    return QuerySpec.make(name, atoms)


def format_query(q: QuerySpec) -> str:
    body = ", ".join(str(a) for a in q.atoms)
    return f"{q.name}({','.join(q.attrs)}) :- {body}."


@dataclass(frozen=True)
class Hypergraph:
    """Attributes as nodes, one edge per atom (edges indexed like atoms)."""

    nodes: tuple[str, ...]
    edges: tuple[frozenset[str], ...]

    def edges_containing(self, attr: str) -> list[int]:
        return [i for i, e in enumerate(self.edges) if attr in e]

    def is_connected(self) -> bool:
        if not self.nodes:
            return True
        seen = {self.nodes[0]}
        frontier = [self.nodes[0]]
        while frontier:
            a = frontier.pop()
            for e in self.edges:
                if a in e:
                    for b in e:
                        if b not in seen:
                            seen.add(b)
                            frontier.append(b)
        return len(seen) == len(self.nodes)


def hypergraph_of(q: QuerySpec) -> Hypergraph:
    return Hypergraph(q.attrs, tuple(a.var_set for a in q.atoms))


# Pattern query corpus (subgraph queries on 3-5 nodes). Each atom binds to a
# copy of the input graph when run with --graph.
BUILTIN_QUERIES = {
    "q1": "Q1(a,b,c) :- R1(a,b), R2(b,c), R3(a,c).",
    "q2": "Q2(a,b,c,d) :- R1(a,b), R2(b,c), R3(c,d), R4(d,a), R5(a,c), R6(b,d).",
    "q3": (
        "Q3(a,b,c,d,e) :- R1(a,b), R2(b,c), R3(c,d), R4(d,e), R5(e,a), "
        "R6(a,c), R7(a,d), R8(b,d), R9(b,e), R10(c,e)."
    ),
    "q4": "Q4(a,b,c,d,e) :- R1(a,b), R2(b,c), R3(c,d), R4(d,e), R5(e,a), R6(b,e).",
    "q5": (
        "Q5(a,b,c,d,e) :- R1(a,b), R2(b,c), R3(c,d), R4(d,e), R5(e,a), "
        "R6(b,e), R7(b,d)."
    ),
    "q6": (
        "Q6(a,b,c,d,e) :- R1(a,b), R2(b,c), R3(c,d), R4(d,e), R5(e,a), "
        "R6(b,e), R7(b,d), R8(c,e)."
    ),
}


def builtin_query(name: str) -> QuerySpec:
    key = name.lower()
    if key not in BUILTIN_QUERIES:
        raise QueryParseError(
            f"unknown built-in query {name!r} (have {sorted(BUILTIN_QUERIES)})"
        )
    return parse_query(BUILTIN_QUERIES[key])


def load_query(path_or_name) -> QuerySpec:
    """Resolve a --query argument: a built-in name (q1..q6) or a file path."""
    path_or_name = os.fspath(path_or_name)
    if path_or_name.lower() in BUILTIN_QUERIES:
        return builtin_query(path_or_name)
    with open(path_or_name) as fh:
        return parse_query(fh.read())


def builtin_query_path(name: str):
    """Filesystem path of a shipped .query file (for CLI display/tests)."""
    return resources.files("adj.queries").joinpath(f"{name.lower()}.query")
