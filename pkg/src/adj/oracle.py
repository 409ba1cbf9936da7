"""Reference join evaluator: left-deep pairwise hash joins.

Deliberately independent of the trie/leapfrog machinery so the two routes can
be checked against each other. Atoms join in textual order; each step hash
partitions the next relation on the shared attributes.
"""

from __future__ import annotations

from collections import defaultdict

from .query import QuerySpec
from .relation import Database


def pairwise_join_oracle(db: Database, q: QuerySpec) -> set[tuple[int, ...]]:
    """Full join result as a set of tuples over ``q.attrs``."""
    bound: list[str] = []
    rows: list[tuple[int, ...]] = [()]

    for atom in q.atoms:
        rel = db.get(atom.name)
        if rel.arity != len(atom.vars):
            raise _arity_error(atom, rel)
        shared = [v for v in atom.vars if v in bound]
        new = [v for v in atom.vars if v not in bound]
        shared_cols = [atom.vars.index(v) for v in shared]
        new_cols = [atom.vars.index(v) for v in new]
        shared_pos = [bound.index(v) for v in shared]

        index = defaultdict(list)
        for t in rel.tuples.tolist():
            key = tuple(t[c] for c in shared_cols)
            index[key].append(tuple(t[c] for c in new_cols))
        # Distinct extensions only: the same (shared, new) projection can
        # repeat when the atom has columns... it cannot, tuples are a set and
        # every column is either shared or new. Keep the plain list.

        next_rows = []
        for row in rows:
            key = tuple(row[p] for p in shared_pos)
            for ext in index.get(key, ()):
                next_rows.append(row + ext)
        rows = next_rows
        bound.extend(new)
        if not rows:
            break

    if not rows:
        return set()
    # Reorder columns from join-discovery order to the query's attribute order.
    perm = [bound.index(a) for a in q.attrs]
    return {tuple(row[i] for i in perm) for row in rows}


def _arity_error(atom, rel):
    from .errors import BindingError

    return BindingError(
        f"atom {atom} has {len(atom.vars)} variables but relation "
        f"{rel.name!r} has arity {rel.arity}"
    )
