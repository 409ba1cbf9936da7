"""Generalized hypertree decompositions of join queries.

A decomposition is generated from a partition of the atoms into connected
blocks: each block becomes a node whose bag is the union of its schemas, and
the join tree is a maximum-weight spanning tree over pairwise bag overlaps
(if any join tree exists on fixed bags, every max-weight spanning tree is
one, so a single deterministic tree plus an explicit running-intersection
check decides the partition). Width is measured by exact rational fractional
edge covers, so tree comparisons never hinge on float rounding.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

from .errors import PlanLimitError
from .query import QuerySpec

MAX_ATTRS = 12
MAX_ATOMS = 12
PARTITION_CAP = 100_000


@dataclass(frozen=True)
class Hypertree:
    """Nodes carry (bag, lambda); edges form the join tree."""

    bags: tuple[tuple[str, ...], ...]
    lambdas: tuple[tuple[int, ...], ...]   # atom indices per node
    edges: tuple[tuple[int, int], ...]

    @property
    def n_nodes(self) -> int:
        return len(self.bags)

    def bag_set(self, v: int) -> frozenset:
        return frozenset(self.bags[v])

    def adjacency(self) -> dict[int, list[int]]:
        adj = {v: [] for v in range(self.n_nodes)}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return adj

    def describe(self) -> str:
        parts = []
        for v in range(self.n_nodes):
            parts.append(
                "{%s}<-{%s}" % (",".join(self.bags[v]), ",".join(map(str, self.lambdas[v])))
            )
        return " | ".join(parts)


def _solve_fraction_system(A, b):
    """Gaussian elimination over Fractions; None if singular."""
    n = len(b)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        inv = Fraction(1, 1) / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for r in range(n):
            if r != col and M[r][col]:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


@lru_cache(maxsize=4096)
def fractional_cover_number(bag: frozenset, edges: frozenset) -> Fraction:
    """Exact fractional edge cover number of ``bag`` under ``edges``.

    Computed as the matching LP's optimum (the covers' dual): maximize sum(y)
    subject to y >= 0 and sum_{v in e} y_v <= 1 per edge, by enumerating the
    basic feasible points. Strong duality makes the two optima equal, and the
    dual keeps the variable count at |bag|.
    """
    bag_list = sorted(bag)
    n = len(bag_list)
    if n == 0:
        return Fraction(0)
    idx = {a: i for i, a in enumerate(bag_list)}
    restricted = {frozenset(e) & bag for e in edges}
    restricted.discard(frozenset())
    maximal = [e for e in restricted if not any(e < f for f in restricted)]
    covered = frozenset().union(*maximal) if maximal else frozenset()
    if covered != bag:
        raise ValueError(f"attributes {sorted(bag - covered)} not covered by any edge")
    m = len(maximal)
    if comb(m + n, n) > 2_000_000:
        raise PlanLimitError(f"cover LP too large: {m} edges over {n} attributes")

    zero, one = Fraction(0), Fraction(1)
    rows = []
    for e in maximal:
        row = [zero] * n
        for a in e:
            row[idx[a]] = one
        rows.append((row, one))          # edge constraint: row . y <= 1
    for i in range(n):
        row = [zero] * n
        row[i] = one
        rows.append((row, zero))         # tight nonnegativity: y_i = 0

    best = Fraction(0)
    for combo in itertools.combinations(range(m + n), n):
        A = [rows[i][0] for i in combo]
        b = [rows[i][1] if i < m else zero for i in combo]
        y = _solve_fraction_system(A, b)
        if y is None:
            continue
        if any(v < 0 for v in y):
            continue
        if any(sum(r * v for r, v in zip(rows[i][0], y)) > one for i in range(m)):
            continue
        total = sum(y)
        if total > best:
            best = total
    return best


def query_edges(q: QuerySpec) -> frozenset:
    return frozenset(frozenset(atom.vars) for atom in q.atoms)


def fhw(tree: Hypertree, q: QuerySpec) -> Fraction:
    edges = query_edges(q)
    return max(fractional_cover_number(tree.bag_set(v), edges) for v in range(tree.n_nodes))


def _atom_adjacency(q: QuerySpec) -> list[int]:
    """Bitmask per atom of the atoms sharing at least one attribute."""
    masks = []
    sets = [a.var_set for a in q.atoms]
    for i, si in enumerate(sets):
        m = 0
        for j, sj in enumerate(sets):
            if i != j and si & sj:
                m |= 1 << j
        masks.append(m)
    return masks


def _block_connected(block: int, adj_masks) -> bool:
    """Is the bitmask `block` of atoms connected under shared attributes?"""
    start = block & (-block)
    seen = start
    frontier = start
    while frontier:
        nxt = 0
        b = frontier
        while b:
            i = (b & -b).bit_length() - 1
            b &= b - 1
            nxt |= adj_masks[i] & block
        frontier = nxt & ~seen
        seen |= frontier
    return seen == block


class _UnionFind:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, x):
        while self.p[x] != x:
            self.p[x] = self.p[self.p[x]]
            x = self.p[x]
        return x

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.p[rb] = ra
        return True


def _max_weight_tree(bag_sets) -> tuple[tuple[int, int], ...] | None:
    """Deterministic max-weight spanning tree over bag overlap sizes."""
    n = len(bag_sets)
    if n == 1:
        return ()
    pairs = [
        (-(len(bag_sets[i] & bag_sets[j])), i, j)
        for i in range(n)
        for j in range(i + 1, n)
    ]
    pairs.sort()
    uf = _UnionFind(n)
    edges = []
    for negw, i, j in pairs:
        if uf.union(i, j):
            edges.append((i, j))
            if len(edges) == n - 1:
                break
    if len(edges) < n - 1:
        return None
    return tuple(sorted(edges))


def _running_intersection_ok(bag_sets, edges) -> bool:
    """Every attribute's nodes must induce a connected subtree."""
    n = len(bag_sets)
    if n == 1:
        return True
    adj = {v: [] for v in range(n)}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    attrs = set().union(*bag_sets)
    for a in attrs:
        holders = [v for v in range(n) if a in bag_sets[v]]
        if len(holders) <= 1:
            continue
        hset = set(holders)
        stack = [holders[0]]
        seen = {holders[0]}
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w in hset and w not in seen:
                    seen.add(w)
                    stack.append(w)
        if seen != hset:
            return False
    return True


def _restricted_growth_partitions(n: int):
    """Set partitions of range(n) in restricted-growth order; the single
    all-in-one block comes first."""
    a = [0] * n
    while True:
        n_blocks = max(a) + 1
        blocks = [[] for _ in range(n_blocks)]
        for i, bi in enumerate(a):
            blocks[bi].append(i)
        yield blocks
        # increment RGS from the right
        i = n - 1
        while i > 0:
            if a[i] <= max(a[:i]):
                a[i] += 1
                for j in range(i + 1, n):
                    a[j] = 0
                break
            a[i] = 0
            i -= 1
        else:
            return


def enumerate_ghds(q: QuerySpec, cap: int = PARTITION_CAP) -> list[Hypertree]:
    """All decompositions generated from connected atom partitions.

    Every emitted tree satisfies edge coverage and the running intersection
    property. Enumeration stops after ``cap`` partitions have been examined;
    the trivial single-node decomposition is examined first and is always
    present. Blocks whose atoms share no attributes are skipped: a
    disconnected block denotes a Cartesian pre-product, which no plan wants.
    """
    if len(q.attrs) > MAX_ATTRS:
        raise PlanLimitError(f"{len(q.attrs)} attributes exceeds limit {MAX_ATTRS}")
    if len(q.atoms) > MAX_ATOMS:
        raise PlanLimitError(f"{len(q.atoms)} atoms exceeds limit {MAX_ATOMS}")
    adj_masks = _atom_adjacency(q)
    out = []
    examined = 0
    for blocks in _restricted_growth_partitions(len(q.atoms)):
        examined += 1
        if examined > cap:
            break
        ok = True
        for blk in blocks:
            mask = 0
            for i in blk:
                mask |= 1 << i
            if not _block_connected(mask, adj_masks):
                ok = False
                break
        if not ok:
            continue
        bag_sets = [
            frozenset().union(*(q.atoms[i].var_set for i in blk)) for blk in blocks
        ]
        edges = _max_weight_tree(bag_sets)
        if edges is None:
            continue
        if not _running_intersection_ok(bag_sets, edges):
            continue
        # coverage holds by construction; order nodes canonically
        order = sorted(
            range(len(blocks)),
            key=lambda v: (tuple(sorted(bag_sets[v])), tuple(blocks[v])),
        )
        remap = {old: new for new, old in enumerate(order)}
        tree = Hypertree(
            bags=tuple(tuple(sorted(bag_sets[v])) for v in order),
            lambdas=tuple(tuple(blocks[v]) for v in order),
            edges=tuple(sorted(tuple(sorted((remap[u], remap[v])))
                               for u, v in edges)),
        )
        out.append(tree)
    return out


def select_optimal(trees, q: QuerySpec) -> Hypertree:
    """Minimum fractional width, then fewer nodes, smaller total bag size,
    and lexicographic bags and lambdas as the final deterministic tie-break."""
    if not trees:
        raise ValueError("no decompositions to choose from")
    return min(
        trees,
        key=lambda t: (
            fhw(t, q),
            t.n_nodes,
            sum(len(b) for b in t.bags),
            t.bags,
            t.lambdas,
        ),
    )


def check_invariants(tree: Hypertree, q: QuerySpec) -> None:
    """Independent re-check of the decomposition invariants; raises on any
    violation."""
    assigned = sorted(i for lam in tree.lambdas for i in lam)
    if assigned != list(range(len(q.atoms))):
        raise AssertionError(f"atoms not partitioned: {tree.lambdas}")
    for v in range(tree.n_nodes):
        bag = tree.bag_set(v)
        for i in tree.lambdas[v]:
            if not q.atoms[i].var_set <= bag:
                raise AssertionError(
                    f"atom {q.atoms[i]} not covered by bag {tree.bags[v]}"
                )
    bag_sets = [tree.bag_set(v) for v in range(tree.n_nodes)]
    if tree.n_nodes > 1:
        uf = _UnionFind(tree.n_nodes)
        for u, v in tree.edges:
            if not uf.union(u, v):
                raise AssertionError("join tree has a cycle")
        if len(tree.edges) != tree.n_nodes - 1 or len(
            {uf.find(v) for v in range(tree.n_nodes)}
        ) != 1:
            raise AssertionError("join tree not connected")
    if not _running_intersection_ok(bag_sets, tree.edges):
        raise AssertionError("running intersection violated")


def candidate_nodes(tree: Hypertree) -> list[int]:
    """Nodes eligible for pre-computation: multi-atom bags, except the
    degenerate single-node tree whose bag is the whole query."""
    if tree.n_nodes == 1:
        return []
    return [v for v in range(tree.n_nodes) if len(tree.lambdas[v]) >= 2]


def candidate_subsets(tree: Hypertree) -> list[tuple[int, ...]]:
    """All subsets of the candidate nodes (the query rewrites reachable by
    pre-computing some of them)."""
    cands = candidate_nodes(tree)
    out = []
    for r in range(len(cands) + 1):
        out.extend(itertools.combinations(cands, r))
    return out


def traversal_orders(tree: Hypertree) -> list[tuple[int, ...]]:
    """Node orders whose every prefix is connected in the join tree."""
    n = tree.n_nodes
    if n == 1:
        return [(0,)]
    adj = tree.adjacency()
    out = []

    def rec(prefix, in_prefix):
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        if prefix:
            cands = sorted(
                v
                for v in range(n)
                if v not in in_prefix and any(u in in_prefix for u in adj[v])
            )
        else:
            cands = range(n)
        for v in cands:
            prefix.append(v)
            in_prefix.add(v)
            rec(prefix, in_prefix)
            prefix.pop()
            in_prefix.discard(v)

    rec([], set())
    return out


def order_from_traversal(tree: Hypertree, traversal, key=None) -> tuple[str, ...]:
    """Concatenate each node's new attributes along the traversal. ``key``
    orders attributes within a node (default: name)."""
    seen = set()
    out = []
    for v in traversal:
        new = [a for a in tree.bags[v] if a not in seen]
        new.sort(key=key)
        out.extend(new)
        seen.update(new)
    return tuple(out)


def valid_orders(tree: Hypertree, q: QuerySpec) -> list[tuple[str, ...]]:
    """Every attribute order realizable from some traversal, allowing any
    permutation inside a node's new-attribute group."""
    found = set()
    for trav in traversal_orders(tree):
        groups = []
        seen = set()
        for v in trav:
            new = [a for a in tree.bags[v] if a not in seen]
            seen.update(new)
            if new:
                groups.append(new)
        for combo in itertools.product(*(itertools.permutations(g) for g in groups)):
            found.add(tuple(itertools.chain.from_iterable(combo)))
    return sorted(found)


def is_valid_order(tree: Hypertree, q: QuerySpec, ord_attrs) -> bool:
    """Does some connected traversal realize ``ord_attrs``? Searches states
    (set of visited nodes); the consumed prefix length is determined by the
    union of visited bags."""
    ord_attrs = tuple(ord_attrs)
    all_attrs = set(q.attrs)
    if set(ord_attrs) != all_attrs or len(ord_attrs) != len(all_attrs):
        return False
    n = tree.n_nodes
    adj = tree.adjacency()
    bag_sets = [tree.bag_set(v) for v in range(n)]

    start = frozenset()
    frontier = {start}
    explored = {start}
    while frontier:
        nxt = set()
        for visited in frontier:
            seen_attrs = (
                frozenset().union(*(bag_sets[v] for v in visited))
                if visited
                else frozenset()
            )
            if seen_attrs == all_attrs:
                return True
            pos = len(seen_attrs)
            for v in range(n):
                if v in visited:
                    continue
                if visited and not any(u in visited for u in adj[v]):
                    continue
                new = bag_sets[v] - seen_attrs
                take = ord_attrs[pos : pos + len(new)]
                if set(take) != new:
                    continue
                state = visited | {v}
                if state not in explored:
                    explored.add(state)
                    nxt.add(frozenset(state))
        frontier = nxt
    return False
