"""Cost model and greedy plan search.

Three costs are traded against each other, all in estimated seconds:

  communication  cost_C  = sum over shipped relations of |R|*dup(R,p) / alpha
  computation    cost_E  = sum over node steps of |T^{v_{i-1}}| / (beta_i * N)
  pre-computing  cost_M  = shuffling + joining a candidate's defining sub-query

alpha (tuples shipped per second) and the beta ladder (extension rates on
tries of various sizes) come from calibration; per-plan extension rates and
prefix cardinalities come from sampling passes. The greedy search builds the
node order back to front: at each position it evaluates, for every node
whose removal keeps the remainder connected, both the ship-it and the
pre-compute-it variant, and commits the cheapest. Prefix cardinalities are
estimated against base atoms and depend only on the node set, which is what
makes the final plan provably no worse under the model than the same order
without pre-computation.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import platform
import time
from bisect import bisect_left
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import FeasibilityError
from .ghd import Hypertree, candidate_nodes, enumerate_ghds, select_optimal
from .hcube import ShareVector
from .query import Atom, QuerySpec
from .sampling import PrefixEstimator, SampleConfig
from .trie import build_trie_from_array

# Fallbacks when no calibration has run; refreshed by `calibrate`.
DEFAULT_ALPHA = 1.2e6
DEFAULT_BETA_TABLE = {
    1_000: 3_000_000.0,
    10_000: 2_400_000.0,
    100_000: 1_250_000.0,
    1_000_000: 600_000.0,
}
BETA_LADDER = (1_000, 10_000, 100_000, 1_000_000)
LOW_CONFIDENCE_CALLS = 100


@dataclass(frozen=True)
class CostModelParams:
    alpha: float = DEFAULT_ALPHA
    beta_table: tuple[tuple[int, float], ...] = tuple(sorted(DEFAULT_BETA_TABLE.items()))
    memory_tuples: int | None = None     # M, per-hypercube pulled-tuple budget
    n_workers: int = 1                   # N*

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if isinstance(self.beta_table, dict):
            object.__setattr__(
                self, "beta_table", tuple(sorted(self.beta_table.items()))
            )
        if not self.beta_table or any(r <= 0 for _, r in self.beta_table):
            raise ValueError("beta table must be nonempty with positive rates")
        if self.memory_tuples is not None and self.memory_tuples <= 0:
            raise ValueError("memory budget must be positive")
        if self.n_workers < 1:
            raise ValueError("need at least one worker")

    def beta_at(self, size: float) -> float:
        """Log-linear interpolation over the ladder, clamped at both ends."""
        pts = self.beta_table
        size = max(float(size), 1.0)
        if size <= pts[0][0]:
            return pts[0][1]
        if size >= pts[-1][0]:
            return pts[-1][1]
        xs = [p[0] for p in pts]
        j = bisect_left(xs, size)
        (s0, r0), (s1, r1) = pts[j - 1], pts[j]
        if s0 == size:
            return r0
        t = (math.log(size) - math.log(s0)) / (math.log(s1) - math.log(s0))
        return r0 + t * (r1 - r0)


def optimize_share(items, attrs, params: CostModelParams) -> tuple[ShareVector, int]:
    """Cheapest share vector for shipping ``items`` (name, attr set, size).

    Searches every integer vector with all components >= 1 and total grid
    size P in [N*, 8*N*], minimizing the shipped tuple-copy count
    sum |R|*dup(R,p). The per-cube memory constraint sum |R|*frac(R,p) <= M
    is equivalent to obj <= M*P, so the whole search stays in integers.
    Ties break to the lexicographically smallest vector. Returns the vector
    and its objective.
    """
    attrs = tuple(attrs)
    n = len(attrs)
    idx = {a: i for i, a in enumerate(attrs)}
    norm = []
    for name, item_attrs, size in items:
        cols = sorted(idx[a] for a in item_attrs)
        if size < 0:
            raise ValueError(f"negative size for {name}")
        norm.append((tuple(cols), int(size)))
    lo = params.n_workers
    cap = 8 * params.n_workers
    M = params.memory_tuples

    best_obj = None
    best_p = None

    def evaluate(p, P):
        nonlocal best_obj, best_p
        obj = 0
        for cols, size in norm:
            pin = 1
            for c in cols:
                pin *= p[c]
            obj += size * (P // pin)
        if M is not None and obj > M * P:
            return
        p = tuple(p)
        if best_obj is None or obj < best_obj or (obj == best_obj and p < best_p):
            best_obj = obj
            best_p = p

    def rec(i, p, prod_so_far):
        if i == n:
            if prod_so_far >= lo:
                evaluate(p, prod_so_far)
            return
        s = 1
        while prod_so_far * s <= cap:
            p.append(s)
            rec(i + 1, p, prod_so_far * s)
            p.pop()
            s += 1

    rec(0, [], 1)
    if best_p is None:
        raise FeasibilityError(
            f"no share vector over {attrs} with P in [{lo}, {cap}] fits the "
            f"memory budget M={M}; raise the worker count or the budget"
        )
    return ShareVector(attrs, best_p), best_obj


def cost_comm(items, share: ShareVector, params: CostModelParams) -> float:
    """Seconds to ship every item under the share vector."""
    total = 0
    pos = {a: i for i, a in enumerate(share.attrs)}
    P = share.P
    for name, item_attrs, size in items:
        pin = 1
        for a in item_attrs:
            pin *= share.shares[pos[a]]
        total += size * (P // pin)
    return total / params.alpha


def cost_comp_step(prefix_count: float, beta: float, params: CostModelParams) -> float:
    """One node step: bindings to extend over rate times workers."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    return prefix_count / (beta * params.n_workers)


@dataclass(frozen=True)
class PrecomputeSpec:
    """Everything needed to pre-compute one candidate and cost it."""

    node: int
    name: str
    attrs: tuple[str, ...]            # bag, canonical query order
    atom_indices: tuple[int, ...]
    sub_query: QuerySpec
    sub_order: tuple[str, ...]
    sub_share: ShareVector
    est_size: float
    comm_seconds: float               # shuffling lambda(v)
    comp_seconds: float               # joining the sub-query
    low_confidence: bool

    @property
    def total_seconds(self) -> float:
        return self.comm_seconds + self.comp_seconds


@dataclass
class CostBreakdown:
    optimization: float = 0.0
    pre_computing: float = 0.0
    communication: float = 0.0
    computation: float = 0.0
    measured: bool = False

    @property
    def total(self) -> float:
        base = self.pre_computing + self.communication + self.computation
        return base + self.optimization if self.measured else base

    def as_dict(self) -> dict:
        return {
            "Optimization": self.optimization,
            "Pre-Computing": self.pre_computing,
            "Communication": self.communication,
            "Computation": self.computation,
            "Total": self.total,
            "measured": self.measured,
        }


@dataclass
class QueryPlan:
    query: QuerySpec
    rewritten: QuerySpec
    tree: Hypertree
    traversal: tuple[int, ...]            # node order, front to back
    precomputed: tuple[PrecomputeSpec, ...]
    ord_attrs: tuple[str, ...]
    share: ShareVector
    params: CostModelParams
    estimate: CostBreakdown
    no_precompute_total: float            # same order, C = empty, for the record
    pairs_evaluated: int
    step_costs: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "query": str(self.query),
            "rewritten": str(self.rewritten),
            "tree": self.tree.describe(),
            "traversal": list(self.traversal),
            "precomputed": [
                {
                    "name": p.name,
                    "attrs": list(p.attrs),
                    "atoms": [str(self.query.atoms[i]) for i in p.atom_indices],
                    "estimatedSize": p.est_size,
                    "share": list(p.sub_share.shares),
                    "order": list(p.sub_order),
                    "lowConfidenceRate": p.low_confidence,
                }
                for p in self.precomputed
            ],
            "order": list(self.ord_attrs),
            "share": list(self.share.shares),
            "workers": self.params.n_workers,
            "estimate": self.estimate.as_dict(),
            "noPrecomputeTotal": self.no_precompute_total,
            "pairsEvaluated": self.pairs_evaluated,
        }


def _removable(tree: Hypertree, remaining: frozenset) -> list[int]:
    """Nodes whose removal keeps the remaining set connected in the tree."""
    if len(remaining) == 1:
        return sorted(remaining)
    adj = tree.adjacency()
    out = []
    for v in sorted(remaining):
        rest = remaining - {v}
        start = next(iter(rest))
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w in rest and w not in seen:
                    seen.add(w)
                    stack.append(w)
        if seen == rest:
            out.append(v)
    return out


class _PlanContext:
    """Shared lookups for one greedy search."""

    def __init__(self, q, db, tree, params, estimator: PrefixEstimator):
        self.q = q
        self.db = db
        self.tree = tree
        self.params = params
        self.est = estimator
        self.atom_sizes = [len(db.get(a.name)) for a in q.atoms]
        self._pre_specs: dict[int, PrecomputeSpec] = {}

    def prefix_count(self, nodes: frozenset) -> float:
        if not nodes:
            return 1.0
        st = self.est.stats_for(nodes, None)
        return max(st.estimate.value, 0.0)

    def node_beta_sampled(self, full_set: frozenset, v: int) -> tuple[float, bool]:
        """Extension rate for node v bound last among full_set; falls back to
        the ladder scaled by the atom count when sampling saw too little."""
        st = self.est.stats_for(full_set, v)
        calls, secs = st.node_rate(len(st.nodes) - 1)
        if calls >= LOW_CONFIDENCE_CALLS and secs > 0:
            return calls / secs, False
        lam = self.tree.lambdas[v]
        if len(lam) == 1:
            size = self.atom_sizes[lam[0]]
        else:
            size = max(self.precompute_spec(v).est_size, 1.0)
        return self.params.beta_at(size) / len(lam), True

    def precompute_spec(self, v: int) -> PrecomputeSpec:
        if v in self._pre_specs:
            return self._pre_specs[v]
        tree, q = self.tree, self.q
        lam = tree.lambdas[v]
        bag = tuple(a for a in q.attrs if a in tree.bag_set(v))
        name = "pre_" + "_".join(q.atoms[i].name for i in lam)
        sub_atoms = tuple(q.atoms[i] for i in lam)
        sub_query = QuerySpec(name=name, atoms=sub_atoms, attrs=bag)
        st = self.est.node_subquery_stats(v)
        est_size = max(st.estimate.value, 0.0)
        items = [
            (q.atoms[i].name, q.atoms[i].vars, self.atom_sizes[i]) for i in lam
        ]
        sub_share, obj = optimize_share(items, bag, self.params)
        comm = obj / self.params.alpha
        # Sub-query computation: per attribute step, prefix count over rate.
        comp = 0.0
        low_conf = False
        prev = 1.0
        for j in range(len(st.attrs)):
            calls = st.estimate.level_ext_calls[j]
            secs = st.estimate.level_seconds[j]
            if calls >= LOW_CONFIDENCE_CALLS and secs > 0:
                beta_j = calls / secs
            else:
                beta_j = self.params.beta_at(max(est_size, 1.0)) / len(lam)
                low_conf = True
            comp += cost_comp_step(prev, beta_j, self.params)
            prev = max(st.estimate.level_bindings[j], 0.0)
        spec = PrecomputeSpec(
            node=v,
            name=name,
            attrs=bag,
            atom_indices=lam,
            sub_query=sub_query,
            sub_order=st.attrs,
            sub_share=sub_share,
            est_size=est_size,
            comm_seconds=comm,
            comp_seconds=comp,
            low_confidence=low_conf,
        )
        self._pre_specs[v] = spec
        return spec

    def shipped_items(self, C: frozenset):
        """The rewritten relation set: pre-computed nodes replace their
        atoms; every other atom ships as-is."""
        absorbed = set()
        items = []
        for v in sorted(C):
            spec = self.precompute_spec(v)
            absorbed.update(spec.atom_indices)
            items.append((spec.name, spec.attrs, max(int(math.ceil(spec.est_size)), 0)))
        for i, atom in enumerate(self.q.atoms):
            if i not in absorbed:
                items.append((atom.name, atom.vars, self.atom_sizes[i]))
        return items

    def comm_cost(self, C: frozenset) -> tuple[float, ShareVector]:
        items = self.shipped_items(C)
        share, obj = optimize_share(items, self.q.attrs, self.params)
        return obj / self.params.alpha, share


def greedy_optimize(
    q: QuerySpec,
    db,
    tree: Hypertree,
    params: CostModelParams,
    sample_cfg: SampleConfig = SampleConfig(),
    *,
    allow_precompute: bool = True,
    estimator: PrefixEstimator | None = None,
) -> QueryPlan:
    """Build the node order back to front, deciding per step whether the
    landing node's relation is shipped raw or pre-computed."""
    if tree.n_nodes == 0:
        raise ValueError("empty hypertree")
    est = estimator or PrefixEstimator(db, q, tree, sample_cfg)
    ctx = _PlanContext(q, db, tree, params, est)
    eligible = set(candidate_nodes(tree)) if allow_precompute else set()

    remaining = frozenset(range(tree.n_nodes))
    order_rev: list[int] = []
    C: frozenset = frozenset()
    pairs = 0
    step_log = []

    while remaining:
        choices = []
        comm_ship, _ = ctx.comm_cost(C)
        for v in _removable(tree, remaining):
            pairs += 1
            prefix = remaining - {v}
            t_prev = ctx.prefix_count(prefix)
            beta_ship, _ = ctx.node_beta_sampled(remaining, v)
            c_ship = comm_ship + cost_comp_step(t_prev, beta_ship, params)
            choices.append((c_ship, 0, v, C))
            if v in eligible and v not in C:
                spec = ctx.precompute_spec(v)
                C2 = C | {v}
                comm_pre, _ = ctx.comm_cost(C2)
                beta_pre = params.beta_at(max(spec.est_size, 1.0))
                c_pre = (
                    spec.total_seconds
                    + comm_pre
                    + cost_comp_step(t_prev, beta_pre, params)
                )
                choices.append((c_pre, 1, v, C2))
        cost, variant, v, new_C = min(choices, key=lambda t: (t[0], t[1], t[2]))
        step_log.append(
            {"position": len(remaining), "node": v,
             "precompute": bool(variant), "stepCost": cost}
        )
        order_rev.append(v)
        C = new_C
        remaining = remaining - {v}

    traversal = tuple(reversed(order_rev))
    ord_attrs, _bounds = est.order_for(traversal)

    # Final share over the rewritten relation set, then the breakdown.
    comm_seconds, share = ctx.comm_cost(C)
    specs = tuple(ctx.precompute_spec(v) for v in sorted(C))
    pre_seconds = sum(s.total_seconds for s in specs)

    def comp_total(with_C: frozenset) -> float:
        total = 0.0
        bound: frozenset = frozenset()
        for v in traversal:
            t_prev = ctx.prefix_count(bound)
            full = bound | {v}
            if v in with_C:
                beta = params.beta_at(max(ctx.precompute_spec(v).est_size, 1.0))
            else:
                beta, _ = ctx.node_beta_sampled(full, v)
            total += cost_comp_step(t_prev, beta, params)
            bound = full
        return total

    comp_seconds = comp_total(C)
    breakdown = CostBreakdown(
        optimization=0.0,
        pre_computing=pre_seconds,
        communication=comm_seconds,
        computation=comp_seconds,
        measured=False,
    )
    base_comm, _ = ctx.comm_cost(frozenset())
    no_pre_total = base_comm + comp_total(frozenset())
    # Per-step minimality telescopes into plan-level dominance: the chosen
    # plan never models worse than shipping everything raw in the same order.
    assert breakdown.total <= no_pre_total * (1 + 1e-9) + 1e-12, (
        breakdown.total, no_pre_total)

    rewritten = _rewrite_query(q, specs)
    return QueryPlan(
        query=q,
        rewritten=rewritten,
        tree=tree,
        traversal=traversal,
        precomputed=specs,
        ord_attrs=ord_attrs,
        share=share,
        params=params,
        estimate=breakdown,
        no_precompute_total=no_pre_total,
        pairs_evaluated=pairs,
        step_costs=step_log,
    )


def _rewrite_query(q: QuerySpec, specs) -> QuerySpec:
    absorbed = set()
    for s in specs:
        absorbed.update(s.atom_indices)
    atoms = [a for i, a in enumerate(q.atoms) if i not in absorbed]
    atoms.extend(Atom(s.name, s.attrs) for s in specs)
    return QuerySpec(name=q.name, atoms=tuple(atoms), attrs=q.attrs)


@lru_cache(maxsize=64)
def optimal_tree(q: QuerySpec) -> Hypertree:
    """Decomposition search depends only on query structure; cache it."""
    return select_optimal(enumerate_ghds(q), q)


def plan_query(
    db,
    q: QuerySpec,
    params: CostModelParams,
    sample_cfg: SampleConfig = SampleConfig(),
    *,
    allow_precompute: bool = True,
) -> QueryPlan:
    """Select the optimal decomposition and run the greedy search over it;
    optimization wall time (including sampling) lands in the breakdown."""
    t0 = time.perf_counter()
    tree = optimal_tree(q)
    plan = greedy_optimize(
        q, db, tree, params, sample_cfg, allow_precompute=allow_precompute
    )
    plan.estimate.optimization = time.perf_counter() - t0
    return plan


# --- calibration ---------------------------------------------------------


def host_fingerprint() -> str:
    blob = repr((platform.node(), platform.machine(),
                 platform.python_version(), os.cpu_count()))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def cache_dir() -> Path:
    env = os.environ.get("ADJ_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "adj"


def calibration_cache_path() -> Path:
    return cache_dir() / f"calibration-{host_fingerprint()}.json"


def calibrate_beta_table(
    sizes=BETA_LADDER, k: int = 100_000, seed: int = 0
) -> dict[int, float]:
    """Measured extension rates: for each ladder size, build a random binary
    trie and time k seek-and-descend probes against it."""
    rng = np.random.default_rng(seed)
    table = {}
    for size in sizes:
        rows = rng.integers(0, 2 * size, size=(size, 2), dtype=np.int64)
        trie = build_trie_from_array(rows, ("x", "y"))
        lists = trie.level_lists()
        v0, cb0, ce0 = lists[0]
        v1 = lists[1][0]
        n0 = len(v0)
        targets = rng.integers(0, 2 * size, size=k).tolist()
        sub_targets = rng.integers(0, 2 * size, size=k).tolist()
        t0 = time.perf_counter()
        for t, t2 in zip(targets, sub_targets):
            pos = bisect_left(v0, t)
            if pos >= n0:
                continue
            lo, hi = cb0[pos], ce0[pos]
            bisect_left(v1, t2, lo, hi)
        elapsed = time.perf_counter() - t0
        table[int(size)] = k / elapsed
    return table


def load_calibration() -> dict | None:
    path = calibration_cache_path()
    if not path.exists():
        return None
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError):
        return None
    if data.get("fingerprint") != host_fingerprint():
        return None
    return data


def save_calibration(alpha: float, beta_table: dict[int, float]) -> Path:
    path = calibration_cache_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "fingerprint": host_fingerprint(),
        "alpha": alpha,
        "beta": {str(k): v for k, v in beta_table.items()},
        "savedAt": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


def params_from_calibration(
    n_workers: int, memory_tuples: int | None = None
) -> CostModelParams:
    """Cached calibration when present, library defaults otherwise."""
    data = load_calibration()
    if data is None:
        return CostModelParams(n_workers=n_workers, memory_tuples=memory_tuples)
    beta = {int(k): float(v) for k, v in data["beta"].items()}
    return CostModelParams(
        alpha=float(data["alpha"]),
        beta_table=tuple(sorted(beta.items())),
        memory_tuples=memory_tuples,
        n_workers=n_workers,
    )
