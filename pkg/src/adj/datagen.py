"""Example data: the five-relation walkthrough database and graph generators
used by the test suite and the experiment scripts."""

from __future__ import annotations

import numpy as np

from .query import QuerySpec, parse_query
from .relation import Database, Relation

RUNNING_EXAMPLE_QUERY = (
    "Q(a,b,c,d,e) :- R1(a,b,c), R2(a,d), R3(c,d), R4(b,e), R5(c,e)."
)


def running_example_query() -> QuerySpec:
    return parse_query(RUNNING_EXAMPLE_QUERY)


def running_example_db() -> Database:
    """Five small relations wired so every walkthrough in the docs/tests works
    out: under shares p=(1,2,2,1,1) with mod hashing, server (0,0,0,0,0) sees
    a-values {1} from R1 and {1,4} from R2, extends b to {2}, and emits the
    full result; R3 groups into exactly two blocks; |R4 join R5| = 9."""
    db = Database()
    db.add(Relation("R1", ("a", "b", "c"), [(1, 2, 2), (1, 3, 1), (2, 1, 2)]))
    db.add(Relation("R2", ("a", "d"), [(1, 1), (1, 2), (4, 1)]))
    db.add(Relation("R3", ("c", "d"), [(1, 1), (1, 2), (2, 1), (2, 2)]))
    db.add(Relation("R4", ("b", "e"), [(2, 1), (3, 1), (5, 1), (3, 2)]))
    db.add(Relation("R5", ("c", "e"), [(2, 1), (4, 1), (6, 1), (5, 3)]))
    return db


def random_graph(n_nodes: int, n_edges: int, seed: int, name: str = "edges") -> Relation:
    """Directed G(n, m) without duplicate edges (self-loops allowed)."""
    rng = np.random.default_rng(seed)
    seen: set[tuple[int, int]] = set()
    rows = []
    while len(rows) < n_edges:
        need = n_edges - len(rows)
        src = rng.integers(0, n_nodes, size=2 * need + 8)
        dst = rng.integers(0, n_nodes, size=2 * need + 8)
        for s, d in zip(src.tolist(), dst.tolist()):
            if (s, d) not in seen:
                seen.add((s, d))
                rows.append((s, d))
                if len(rows) == n_edges:
                    break
    return Relation(name, ("src", "dst"), rows)


def hub_graph(
    n_nodes: int = 2000,
    n_hubs: int = 20,
    hub_degree: int = 200,
    n_background: int = 1500,
    seed: int = 0,
    name: str = "edges",
) -> Relation:
    """Skewed graph: ``n_hubs`` nodes of degree >= hub_degree.

    Hubs are pairwise connected in both directions (a dense core, so cyclic
    patterns concentrate there), each hub gets spokes to random non-hub nodes
    in random orientation, and a sparse random background is layered on top.
    """
    rng = np.random.default_rng(seed)
    hubs = list(range(n_hubs))
    rows = set()
    for h in hubs:
        for g in hubs:
            if h != g:
                rows.add((h, g))
    spokes_needed = max(hub_degree - 2 * (n_hubs - 1), 0)
    for h in hubs:
        others = rng.choice(
            np.arange(n_hubs, n_nodes), size=spokes_needed, replace=False
        )
        for o in others.tolist():
            if rng.random() < 0.5:
                rows.add((h, int(o)))
            else:
                rows.add((int(o), h))
    while n_background > 0:
        s = int(rng.integers(0, n_nodes))
        d = int(rng.integers(0, n_nodes))
        if (s, d) not in rows:
            rows.add((s, d))
            n_background -= 1
    return Relation(name, ("src", "dst"), sorted(rows))


def degree_counts(graph: Relation) -> dict[int, int]:
    """Total degree (in + out) per node."""
    deg: dict[int, int] = {}
    for s, d in graph.tuples.tolist():
        deg[s] = deg.get(s, 0) + 1
        deg[d] = deg.get(d, 0) + 1
    return deg
