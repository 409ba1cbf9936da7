"""Relations, databases, and the edge-list loader.

Tuples are integer-valued throughout; a relation stores them as a
lexicographically sorted, duplicate-free int64 matrix (set semantics). Inputs
with string keys are expected to be dictionary-encoded before they get here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BindingError, QueryParseError


def canonical_tuples(rows, arity: int) -> np.ndarray:
    """Sort rows lexicographically and drop duplicates (set semantics)."""
    arr = np.asarray(rows, dtype=np.int64)
    if arr.size == 0:
        return np.empty((0, arity), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != arity:
        raise BindingError(f"expected arity-{arity} tuples, got shape {arr.shape}")
    return np.unique(arr, axis=0)


@dataclass(frozen=True)
class Relation:
    """A named, duplicate-free set of integer tuples.

    ``schema`` names the columns of the stored relation. When a relation is
    bound to a query atom, the atom's variable list (not this schema) decides
    which query attribute each column feeds.
    """

    name: str
    schema: tuple[str, ...]
    tuples: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(
            self, "tuples", canonical_tuples(self.tuples, len(self.schema))
        )

    @property
    def arity(self) -> int:
        return len(self.schema)

    def __len__(self) -> int:
        return self.tuples.shape[0]

    def tuple_set(self) -> set[tuple[int, ...]]:
        return set(map(tuple, self.tuples.tolist()))

    def project_column(self, col: int) -> np.ndarray:
        """Distinct values of one column, ascending."""
        return np.unique(self.tuples[:, col])

    def rename(self, name: str) -> "Relation":
        return Relation(name, self.schema, self.tuples)


@dataclass
class Database:
    """Named relation store. Atom names resolve here at execution time."""

    relations: dict[str, Relation] = field(default_factory=dict)

    def add(self, rel: Relation) -> None:
        self.relations[rel.name] = rel

    def get(self, name: str) -> Relation:
        try:
            return self.relations[name]
        except KeyError:
            raise BindingError(f"no relation bound for atom {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.relations

    @classmethod
    def for_graph(cls, atom_names, graph: Relation) -> "Database":
        """Bind every atom of a pattern query to one edge relation."""
        return cls({name: graph for name in atom_names})


def load_edge_list(path, name: str = "edges") -> Relation:
    """Load a directed edge list: one ``src dst`` integer pair per line.

    ``#`` starts a comment, blank lines are skipped, duplicate edges collapse,
    self-loops are kept.
    """
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 2:
                raise QueryParseError(
                    f"{path}:{lineno}: expected 2 fields, got {len(parts)}"
                )
            try:
                rows.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise QueryParseError(
                    f"{path}:{lineno}: non-integer token in {text!r}"
                ) from None
    return Relation(name, ("src", "dst"), canonical_tuples(rows, 2))
