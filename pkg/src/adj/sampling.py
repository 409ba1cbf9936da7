"""Sampling-based cardinality estimation.

The estimator targets |Q| = |val(A)| * E[|Q_{A=a}|] for the first attribute
A of the chosen order, where val(A) is the intersection of the projections
of every atom containing A (exactly the level-0 binding set of a leapfrog
run). Values are drawn uniformly with replacement; the database is semijoin
reduced to the drawn values before the per-value fixed joins run. When
val(A) fits within the sample budget the estimator walks it exhaustively
and the result is exact.

The same passes feed the plan search: per-level binding counts give prefix
cardinalities, and per-level extension call/time totals give extension
rates.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .leapfrog import LevelStats, lf_join, lf_join_fixed, ordered_attrs
from .query import QuerySpec
from .relation import Database, Relation
from .trie import build_trie_from_array


DEFAULT_SAMPLES = 100_000


@dataclass(frozen=True)
class SampleConfig:
    """Sample budget: an explicit k wins, else (eps, delta) sizes it via the
    Chernoff-Hoeffding bound, else the default budget applies."""

    k: int | None = None
    eps: float | None = None
    delta: float | None = None
    seed: int = 0

    @property
    def effective_k(self) -> int:
        if self.k is not None:
            if self.k < 1:
                raise ValueError("k must be >= 1")
            return self.k
        if self.eps is not None and self.delta is not None:
            return chernoff_sample_size(self.eps, self.delta)
        return DEFAULT_SAMPLES


def chernoff_sample_size(eps: float, delta: float) -> int:
    """Samples sufficient for an additive-eps, confidence 1-delta bound on a
    mean of [0,1] variables: ceil(ln(2/delta) / (2 eps^2))."""
    if eps <= 0 or not 0 < delta < 1:
        raise ValueError("need eps > 0 and 0 < delta < 1")
    return math.ceil(math.log(2.0 / delta) / (2.0 * eps * eps))


def _stable_rng(seed: int, *context) -> np.random.Generator:
    """Deterministic across processes: context is folded in via sha256, not
    the salted builtin hash."""
    h = hashlib.sha256(repr(context).encode())
    words = [int.from_bytes(h.digest()[i : i + 8], "little") for i in range(0, 32, 8)]
    return np.random.default_rng([seed & 0xFFFFFFFF, *words])


def attribute_values(db: Database, q: QuerySpec, attr: str) -> np.ndarray:
    """val(attr): sorted intersection of the projections of every atom
    containing attr."""
    vals = None
    for atom in q.atoms:
        if attr not in atom.vars:
            continue
        col = np.unique(db.get(atom.name).tuples[:, atom.vars.index(attr)])
        vals = col if vals is None else np.intersect1d(vals, col, assume_unique=True)
    if vals is None:
        raise ValueError(f"attribute {attr!r} appears in no atom of {q.name}")
    return vals


def semijoin_reduce(db: Database, q: QuerySpec, attr: str, values: np.ndarray):
    """Per-atom relations filtered to attr in values; atoms without attr are
    passed through. Returns {atom name: Relation}."""
    values = np.asarray(values, dtype=np.int64)
    out = {}
    for atom in q.atoms:
        rel = db.get(atom.name)
        if attr in atom.vars:
            mask = np.isin(rel.tuples[:, atom.vars.index(attr)], values)
            out[atom.name] = Relation(rel.name, rel.schema, rel.tuples[mask])
        else:
            out[atom.name] = rel
    return out


def build_atom_tries(atom_rows: dict, atoms, ord_attrs, *, project: bool = False):
    """Tries for the atoms along ord_attrs. With ``project`` set, atoms are
    projected onto the attributes present in ord_attrs and atoms with none
    of them are dropped (prefix sub-queries)."""
    ord_set = set(ord_attrs)
    tries = []
    for atom in atoms:
        attrs = [a for a in atom.vars if a in ord_set] if project else list(atom.vars)
        if not attrs:
            continue
        if not project and any(a not in ord_set for a in atom.vars):
            raise ValueError(f"order {ord_attrs} missing attributes of {atom}")
        to = ordered_attrs(attrs, ord_attrs)
        rows = atom_rows[atom.name]
        cols = [atom.vars.index(a) for a in to]
        tries.append(build_trie_from_array(rows[:, cols], to))
    if not tries:
        raise ValueError("no atoms participate in the order")
    return tries


@dataclass
class CardinalityEstimate:
    attrs: tuple[str, ...]
    value: float                      # estimated |Q| = val_count * sample_mean
    exact: bool
    val_count: int                    # |val(first attr)|
    samples: int                      # draws actually used (0 when exact)
    sample_mean: float                # mean per-value count over the draws
    sample_max: float                 # largest observed per-value count
    level_bindings: list[float]       # estimated |T^{i+1}| per level
    level_ext_calls: list[int]
    level_seconds: list[float]
    wall_seconds: float

    def heuristic_interval(self, delta: float = 0.05) -> tuple[float, float]:
        """Two-sided bound with sample_max standing in for the (unknown)
        range of the per-value counts; heuristic, not a guarantee."""
        if self.exact or self.samples == 0:
            return (self.value, self.value)
        half = self.sample_max * math.sqrt(
            math.log(2.0 / delta) / (2.0 * self.samples)
        )
        lo = max(0.0, (self.sample_mean - half) * self.val_count)
        hi = (self.sample_mean + half) * self.val_count
        return (lo, hi)

    def as_dict(self) -> dict:
        lo, hi = self.heuristic_interval()
        return {
            "attrs": list(self.attrs),
            "estimate": self.value,
            "exact": self.exact,
            "valCount": self.val_count,
            "samples": self.samples,
            "sampleMean": self.sample_mean,
            "sampleMax": self.sample_max,
            "heuristicInterval": [lo, hi],
            "levelBindings": list(self.level_bindings),
            "levelExtCalls": list(self.level_ext_calls),
            "levelSeconds": list(self.level_seconds),
            "wallSeconds": self.wall_seconds,
        }


def estimate_cardinality(
    db: Database,
    q: QuerySpec,
    ord_attrs,
    cfg: SampleConfig = SampleConfig(),
    *,
    counter=None,
) -> CardinalityEstimate:
    """Estimate |Q| along ord_attrs (which may cover only a prefix of the
    query's attributes; atoms are then projected accordingly).

    ``counter(value) -> LevelStats`` overrides how a single fixed value is
    counted; the distributed path plugs in here. The default runs the fixed
    join locally on the semijoin-reduced tries.
    """
    ord_attrs = tuple(ord_attrs)
    k = cfg.effective_k
    atom_rows = {atom.name: db.get(atom.name).tuples for atom in q.atoms}
    project = set(ord_attrs) != set(q.attrs)
    first = ord_attrs[0]
    vals = attribute_values(db, q, first)
    n_val = len(vals)
    n_lev = len(ord_attrs)

    if n_val == 0:
        return CardinalityEstimate(ord_attrs, 0.0, True, 0, 0, 0.0, 0.0,
                                   [0.0] * n_lev, [0] * n_lev, [0.0] * n_lev, 0.0)

    if n_val <= k and counter is None:
        # Exhaustive short-circuit: one full run is exact. Per-value maxima
        # are not observed on this path; the interval is degenerate anyway.
        tries = build_atom_tries(atom_rows, q.atoms, ord_attrs, project=project)
        stats = LevelStats(ord_attrs)
        count, _ = lf_join(tries, ord_attrs, stats=stats)
        return CardinalityEstimate(
            ord_attrs,
            float(count),
            True,
            n_val,
            0,
            count / n_val,
            0.0,
            [float(b) for b in stats.bindings],
            list(stats.ext_calls),
            list(stats.seconds),
            stats.wall_seconds,
        )

    exhaustive = n_val <= k
    if exhaustive:
        # Every value visited once: the weighted sums below are exact.
        uniq, mult = vals, np.ones(n_val, dtype=np.int64)
        scale = 1.0
        denom = n_val
    else:
        rng = _stable_rng(cfg.seed, "estimate", q.name, ord_attrs, first)
        draws = vals[rng.integers(0, n_val, size=k)]
        uniq, mult = np.unique(draws, return_counts=True)
        scale = n_val / k
        denom = k

    if counter is None:
        reduced = semijoin_reduce(db, q, first, uniq)
        red_rows = {name: rel.tuples for name, rel in reduced.items()}
        tries = build_atom_tries(red_rows, q.atoms, ord_attrs, project=project)

        def counter(value):
            st = LevelStats(ord_attrs)
            lf_join_fixed(tries, ord_attrs, value, stats=st)
            return st

    tot_bind = np.zeros(n_lev)
    tot_calls = [0] * n_lev
    tot_secs = [0.0] * n_lev
    wall = 0.0
    vmax = 0.0
    for value, m in zip(uniq.tolist(), mult.tolist()):
        st = counter(value)
        tot_bind += np.asarray(st.bindings, dtype=float) * m
        if st.bindings[-1] > vmax:
            vmax = float(st.bindings[-1])
        for i in range(n_lev):
            tot_calls[i] += st.ext_calls[i]
            tot_secs[i] += st.seconds[i]
        wall += st.wall_seconds
    level_est = (tot_bind * scale).tolist()
    mean = float(tot_bind[-1]) / denom
    return CardinalityEstimate(
        ord_attrs,
        level_est[-1],
        exhaustive,
        n_val,
        0 if exhaustive else k,
        mean,
        vmax,
        level_est,
        tot_calls,
        tot_secs,
        wall,
    )


@dataclass
class PrefixStats:
    """Level statistics of a prefix sub-query pass, aggregated per node."""

    nodes: tuple[int, ...]            # node arrangement used
    attrs: tuple[str, ...]
    boundaries: tuple[int, ...]       # attr count consumed after each node
    estimate: CardinalityEstimate

    def bindings_after(self, node_pos: int) -> float:
        """Estimated binding count after the first node_pos+1 nodes."""
        return self.estimate.level_bindings[self.boundaries[node_pos] - 1]

    def node_rate(self, node_pos: int) -> tuple[int, float]:
        """(extension calls, seconds) summed over a node's levels."""
        lo = 0 if node_pos == 0 else self.boundaries[node_pos - 1]
        hi = self.boundaries[node_pos]
        calls = sum(self.estimate.level_ext_calls[lo:hi])
        secs = sum(self.estimate.level_seconds[lo:hi])
        return calls, secs


class PrefixEstimator:
    """Memoized prefix-cardinality passes over one (query, tree, database).

    Prefix binding counts depend only on the set of nodes bound so far, not
    on their order, so passes are keyed by (node set, last node). One pass
    arranges the set canonically with the requested node last, projects the
    atoms onto the prefix attributes, and runs the sampling estimator; its
    per-node totals serve both |T| lookups and extension-rate estimates.
    """

    def __init__(self, db: Database, q: QuerySpec, tree, cfg: SampleConfig):
        self.db = db
        self.q = q
        self.tree = tree
        self.cfg = cfg
        self._passes: dict = {}
        self._val_sizes: dict[str, int] = {}

    def val_size(self, attr: str) -> int:
        if attr not in self._val_sizes:
            self._val_sizes[attr] = len(attribute_values(self.db, self.q, attr))
        return self._val_sizes[attr]

    def attr_key(self, attr: str):
        """Within-node ordering heuristic: fewer candidate values first."""
        return (self.val_size(attr), attr)

    def arrange(self, nodes: frozenset, last: int | None = None) -> tuple[int, ...]:
        """Canonical connected arrangement of a node set (optionally with a
        fixed final node)."""
        rest = set(nodes) - ({last} if last is not None else set())
        adj = self.tree.adjacency()
        order: list[int] = []
        if rest:
            pool = set(rest)
            order.append(min(pool))
            pool.remove(order[0])
            while pool:
                nxt = sorted(
                    v for v in pool if any(u in order for u in adj[v])
                )
                if not nxt:
                    raise ValueError(f"node set {sorted(nodes)} not connected")
                order.append(nxt[0])
                pool.remove(nxt[0])
        if last is not None:
            if order and not any(u in order for u in adj[last]):
                raise ValueError(f"{last} not adjacent to {sorted(rest)}")
            order.append(last)
        return tuple(order)

    def order_for(self, arrangement) -> tuple[tuple[str, ...], tuple[int, ...]]:
        """Attribute order for a node arrangement plus per-node boundaries."""
        seen: list[str] = []
        bounds = []
        for v in arrangement:
            new = sorted(
                (a for a in self.tree.bags[v] if a not in seen), key=self.attr_key
            )
            seen.extend(new)
            bounds.append(len(seen))
        return tuple(seen), tuple(bounds)

    def stats_for(self, nodes, last: int | None = None) -> PrefixStats:
        key = (frozenset(nodes), last)
        if key in self._passes:
            return self._passes[key]
        arrangement = self.arrange(frozenset(nodes), last)
        attrs, bounds = self.order_for(arrangement)
        est = estimate_cardinality(self.db, self.q, attrs, self.cfg)
        stats = PrefixStats(arrangement, attrs, bounds, est)
        self._passes[key] = stats
        return stats

    def node_subquery_stats(self, v: int) -> PrefixStats:
        """Stats of the bag sub-query at node v alone (its pre-computation).

        Unlike stats_for, only the bag's own atoms participate: this sizes
        the relation the pre-computing phase materializes and ships, which
        no other atom filters. stats_for({v}) would give the semijoin-tight
        projection instead and undercount the shipped volume."""
        key = ("sub", v)
        if key in self._passes:
            return self._passes[key]
        arrangement = self.arrange(frozenset([v]), None)
        attrs, bounds = self.order_for(arrangement)
        sub_atoms = tuple(self.q.atoms[i] for i in self.tree.lambdas[v])
        sub_q = QuerySpec(f"{self.q.name}_n{v}", sub_atoms, attrs)
        est = estimate_cardinality(self.db, sub_q, attrs, self.cfg)
        stats = PrefixStats(arrangement, attrs, bounds, est)
        self._passes[key] = stats
        return stats


def collect_prefix_stats(db, q, cfg, tree, prefixes) -> dict:
    """Sampled statistics per ordered node prefix.

    Each prefix is a tuple of node ids whose last element is taken as the
    fixed final node; estimates for the same node set are shared through the
    estimator's memo. Returns {prefix: PrefixStats}."""
    est = PrefixEstimator(db, q, tree, cfg)
    out = {}
    for prefix in prefixes:
        prefix = tuple(prefix)
        if any(v < 0 or v >= tree.n_nodes for v in prefix):
            raise ValueError(f"prefix {prefix} references unknown nodes")
        if not prefix:
            # The empty binding: exactly one, by convention.
            out[prefix] = PrefixStats(
                (), (), (), CardinalityEstimate((), 1.0, True, 0, 0, 1.0, 1.0,
                                                [], [], [], 0.0)
            )
            continue
        out[prefix] = est.stats_for(frozenset(prefix), prefix[-1])
    return out
