"""Simulated multi-worker cluster: coordinator plus N single-threaded
workers exchanging immutable messages over bounded queues.

A run is a strict phase sequence driven by the coordinator:

  store         shards of every base relation land on workers (untimed)
  pre-compute   per candidate: its own shuffle + per-cube join, the result
                staying sharded on the workers that produced it (timed)
  communication workers group their shards into signature blocks, build and
                serialize block tries, and pull the blocks every assigned
                hypercube needs; ends at a barrier before any join (timed)
  computation   per-cube leapfrog joins, one result report per worker (timed)

The pull protocol is request/response: each worker asks every worker (itself
included) for the blocks its cubes need, and keeps serving incoming requests
until the coordinator ends the phase, so no pair can deadlock. Blocks travel
as serialized tries; each cube pulls its blocks independently, which makes
the measured pull volume match the |R| * dup(R, p) accounting exactly.

Two interchangeable backends: "thread" (cheap, shares one GIL) and
"process" (forked workers, real parallelism). Message payloads are plain
data either way; nothing is shared.
"""

from __future__ import annotations

import queue
import tempfile
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .costmodel import CostBreakdown, QueryPlan
from .errors import MemoryBudgetExceeded
from .hcube import (
    HashFamily,
    ShareVector,
    coordinate_restriction,
    enumerate_coordinates,
    group_blocks,
)
from .leapfrog import LevelStats, lf_join, lf_join_fixed, ordered_attrs
from .trie import TrieIndex, build_trie_from_array, merge_block_tries

SPILL_THRESHOLD = 1_000_000


# --- messages -------------------------------------------------------------


@dataclass(frozen=True)
class BlockRequest:
    src: int
    needs: tuple          # ((entry_id, atom_name, signature), ...)


@dataclass(frozen=True)
class BlockResponse:
    src: int
    entries: tuple        # ((entry_id, trie bytes | None, n_tuples), ...)


@dataclass(frozen=True)
class TaskAssign:
    task: str             # store | shuffle | join | release | sample_prepare
    payload: dict


@dataclass(frozen=True)
class SampleTask:
    token: int
    value: int


@dataclass(frozen=True)
class ResultReport:
    worker: int
    kind: str             # store_done | pulled | joined | sample | error
    payload: dict


@dataclass(frozen=True)
class Shutdown:
    pass


class ClusterError(RuntimeError):
    def __init__(self, phase, worker, message):
        super().__init__(f"worker {worker} failed during {phase}: {message}")
        self.phase = phase
        self.worker = worker


# --- worker side ----------------------------------------------------------


def _put(q, msg, inbox, backlog):
    """Blocking put that keeps draining our own inbox so that two workers
    flooding each other's bounded queues cannot wedge."""
    while True:
        try:
            q.put(msg, timeout=0.05)
            return
        except queue.Full:
            while True:
                try:
                    backlog.append(inbox.get_nowait())
                except queue.Empty:
                    break


class _Worker:
    def __init__(self, wid, n_workers, inboxes, coord_q, spill_dir):
        self.wid = wid
        self.n = n_workers
        self.inboxes = inboxes
        self.inbox = inboxes[wid]
        self.coord_q = coord_q
        self.spill_dir = Path(spill_dir)
        self.backlog = []
        self.store = {}            # name -> rows ndarray | spill Path
        self.sample_ctx = None

    # - plumbing -

    def _next(self, timeout=None):
        if self.backlog:
            return self.backlog.pop(0)
        return self.inbox.get(timeout=timeout)

    def _send(self, dest_wid, msg):
        _put(self.inboxes[dest_wid], msg, self.inbox, self.backlog)

    def _report(self, kind, **payload):
        _put(self.coord_q, ResultReport(self.wid, kind, payload),
             self.inbox, self.backlog)

    # - storage -

    def _store_rows(self, name, rows):
        rows = np.asarray(rows, dtype=np.int64)
        if rows.shape[0] > SPILL_THRESHOLD:
            path = self.spill_dir / f"w{self.wid}_{name}.blk"
            order = tuple(f"c{i}" for i in range(rows.shape[1]))
            path.write_bytes(build_trie_from_array(rows, order).to_bytes())
            self.store[name] = (path, rows.shape[1])
        else:
            self.store[name] = rows

    def _load_rows(self, name):
        val = self.store[name]
        if isinstance(val, tuple):
            path, width = val
            order = tuple(f"c{i}" for i in range(width))
            return TrieIndex.from_bytes(path.read_bytes(), order).to_tuples()
        return val

    # - main loop -

    def run(self):
        while True:
            msg = self._next()
            if isinstance(msg, Shutdown):
                return
            try:
                self._dispatch(msg)
            except Exception as exc:  # surfaces on the coordinator
                payload = {
                    "type": type(exc).__name__,
                    "trace": traceback.format_exc(),
                }
                if isinstance(exc, MemoryBudgetExceeded):
                    payload["fields"] = (exc.worker, exc.pulled, exc.budget,
                                         list(exc.relations))
                self._report("error", **payload)

    def _dispatch(self, msg):
        if isinstance(msg, TaskAssign):
            if msg.task == "store":
                for name, rows in msg.payload["relations"].items():
                    self._store_rows(name, rows)
                self._report("store_done")
            elif msg.task == "shuffle":
                self._shuffle(msg.payload)
            elif msg.task == "sample_prepare":
                self._sample_prepare(msg.payload)
            else:
                raise RuntimeError(f"unexpected task {msg.task!r}")
        elif isinstance(msg, SampleTask):
            self._sample_one(msg)
        elif isinstance(msg, BlockRequest):
            # Stray request after a phase ended; answer with empties so the
            # requester can still make progress.
            self._serve(msg, {})
        else:
            raise RuntimeError(f"unexpected message {type(msg).__name__}")

    # - shuffle stage -

    def _serve(self, req: BlockRequest, blocks, latency=0.0):
        entries = []
        shipped = 0
        for entry_id, atom_name, sig in req.needs:
            hit = blocks.get((atom_name, sig))
            if hit is None:
                entries.append((entry_id, None, 0))
            else:
                payload, n = hit
                entries.append((entry_id, payload, n))
                shipped += 1
        if latency and shipped:
            time.sleep(latency * shipped)
        self._send(req.src, BlockResponse(self.wid, tuple(entries)))

    def _shuffle(self, p):
        atoms = p["atoms"]                    # [(name, vars)]
        share = ShareVector(tuple(p["share_attrs"]), tuple(p["share"]))
        hashf = HashFamily(p["hash_kind"], p["hash_seed"])
        ord_attrs = p.get("ord")
        latency = p.get("latency_per_block", 0.0)
        budget = p.get("memory_tuples")
        pull_only = p.get("pull_only", False)
        attr_pos = {a: i for i, a in enumerate(share.attrs)}

        # Group own shards into blocks and pre-build one trie per block.
        blocks = {}
        for name, vars_ in atoms:
            rows = self._load_rows(name)
            ai = share.indices_of(vars_)
            canon_cols = sorted(range(len(vars_)),
                                key=lambda c: attr_pos[vars_[c]])
            canon_vars = tuple(vars_[c] for c in canon_cols)
            if ord_attrs:
                t_order = ordered_attrs(vars_, ord_attrs)
            else:
                t_order = canon_vars
            perm = [canon_vars.index(a) for a in t_order]
            grouped = group_blocks(rows[:, canon_cols], ai, share, hashf)
            for sig, brows in grouped.items():
                trie = build_trie_from_array(brows[:, perm], t_order)
                blocks[(name, sig)] = (trie.to_bytes(), trie.n_tuples)

        # Every cube pulls its blocks from every worker, self included.
        coords = enumerate_coordinates(share)
        mine = [c for i, c in enumerate(coords) if i % self.n == self.wid]
        needs = []
        entry_meta = []                       # entry_id -> (cube_pos, name, sig)
        for cube_pos, coord in enumerate(mine):
            for name, vars_ in atoms:
                ai = share.indices_of(vars_)
                sig = coordinate_restriction(coord, ai)
                needs.append((len(entry_meta), name, sig))
                entry_meta.append((cube_pos, name, sig))
        req = BlockRequest(self.wid, tuple(needs))
        for w in range(self.n):
            if w != self.wid:
                self._send(w, req)

        received = {}                         # entry_id -> [(bytes, n), ...]
        pulled = {name: 0 for name, _ in atoms}
        self._absorb(self._local_response(req, blocks),
                     received, pulled, entry_meta)
        expect = self.n - 1
        while expect:
            msg = self._next()
            if isinstance(msg, BlockRequest):
                self._serve(msg, blocks, latency)
            elif isinstance(msg, BlockResponse):
                self._absorb(msg, received, pulled, entry_meta)
                expect -= 1
            else:
                raise RuntimeError(f"unexpected {type(msg).__name__} in pull")

        cubes = None
        if not pull_only:
            cubes = self._assemble(atoms, mine, received, entry_meta,
                                   ord_attrs, budget)
        self._report("pulled", pulled=pulled, n_cubes=len(mine))

        # Keep serving stragglers until the coordinator flips the phase.
        while True:
            msg = self._next()
            if isinstance(msg, BlockRequest):
                self._serve(msg, blocks, latency)
            elif isinstance(msg, TaskAssign) and msg.task == "join":
                self._join(p, mine, cubes, msg.payload)
                return
            elif isinstance(msg, TaskAssign) and msg.task == "release":
                return
            else:
                raise RuntimeError(
                    f"unexpected {type(msg).__name__} awaiting phase end")

    def _local_response(self, req, blocks):
        entries = []
        for entry_id, atom_name, sig in req.needs:
            hit = blocks.get((atom_name, sig))
            entries.append((entry_id, hit[0], hit[1]) if hit
                           else (entry_id, None, 0))
        return BlockResponse(self.wid, tuple(entries))

    def _absorb(self, resp, received, pulled, entry_meta):
        for entry_id, payload, n in resp.entries:
            received.setdefault(entry_id, []).append((payload, n))
            if n:
                pulled[entry_meta[entry_id][1]] += n

    def _assemble(self, atoms, mine, received, entry_meta, ord_attrs, budget):
        """Deserialize and merge each cube's pulled blocks into one trie per
        atom, enforcing the per-cube memory budget. Cubes needing the same
        (atom, signature) share the merged trie."""
        cube_loads = [dict() for _ in mine]
        for entry_id, parts in received.items():
            cube_pos, name, _sig = entry_meta[entry_id]
            n_total = sum(n for _, n in parts)
            cube_loads[cube_pos][name] = (
                cube_loads[cube_pos].get(name, 0) + n_total)
        for loads in cube_loads:
            total = sum(loads.values())
            if budget is not None and total > budget:
                heavy = sorted(loads, key=lambda k: (-loads[k], k))
                raise MemoryBudgetExceeded(self.wid, total, budget, heavy)

        orders = {name: ordered_attrs(vars_, ord_attrs) for name, vars_ in atoms}
        merged = {}
        cubes = [dict() for _ in mine]
        for entry_id, parts in received.items():
            cube_pos, name, sig = entry_meta[entry_id]
            key = (name, sig)
            trie = merged.get(key)
            if trie is None:
                t_order = orders[name]
                des = [TrieIndex.from_bytes(b, t_order)
                       for b, n in parts if b is not None]
                if des:
                    trie = merge_block_tries(des)
                else:
                    trie = build_trie_from_array(
                        np.empty((0, len(t_order)), dtype=np.int64), t_order)
                merged[key] = trie
            cubes[cube_pos][name] = trie
        return cubes

    def _join(self, p, mine, cubes, join_payload):
        ord_attrs = tuple(p["ord"])
        atoms = p["atoms"]
        materialize = join_payload.get("materialize", False)
        stats = LevelStats(ord_attrs)
        total = 0
        rows_out = []
        for cube_pos in range(len(mine)):
            tries = [cubes[cube_pos][name] for name, _vars in atoms]
            count, rows = lf_join(tries, ord_attrs,
                                  materialize=materialize, stats=stats)
            total += count
            if materialize and rows:
                rows_out.extend(rows)
        payload = {"count": total, "stats": stats.as_dict()}
        if materialize:
            payload["rows"] = np.asarray(
                rows_out, dtype=np.int64).reshape(-1, len(ord_attrs))
        if "keep_as" in join_payload:
            keep = payload.pop("rows")
            perm = [ord_attrs.index(a) for a in join_payload["keep_attrs"]]
            self._store_rows(
                join_payload["keep_as"],
                keep[:, perm] if len(keep) else
                np.empty((0, len(perm)), dtype=np.int64))
        self._report("joined", **payload)

    # - sampling -

    def _sample_prepare(self, p):
        atoms = p["atoms"]
        ord_attrs = tuple(p["ord"])
        tries = []
        for name, vars_ in atoms:
            rows = np.asarray(p["relations"][name], dtype=np.int64)
            t_order = ordered_attrs(vars_, ord_attrs)
            src_pos = {a: i for i, a in enumerate(vars_)}
            perm = [src_pos[a] for a in t_order]
            tries.append(build_trie_from_array(rows[:, perm], t_order))
        self.sample_ctx = (tries, ord_attrs)
        self._report("store_done")

    def _sample_one(self, msg: SampleTask):
        tries, ord_attrs = self.sample_ctx
        st = LevelStats(ord_attrs)
        lf_join_fixed(tries, ord_attrs, msg.value, stats=st)
        self._report("sample", token=msg.token, stats=st.as_dict())


def _worker_entry(wid, n_workers, inboxes, coord_q, spill_dir):
    _Worker(wid, n_workers, inboxes, coord_q, spill_dir).run()


# --- coordinator side -----------------------------------------------------


@dataclass
class ExecutionReport:
    breakdown: CostBreakdown
    result_count: int
    per_worker_counts: list[int]
    pulled_tuples: dict
    n_cubes: int
    n_workers: int
    level_stats: LevelStats | None = None
    precompute_sizes: dict = field(default_factory=dict)
    rows: np.ndarray | None = None
    manifest: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "breakdown": self.breakdown.as_dict(),
            "resultCount": self.result_count,
            "perWorkerCounts": list(self.per_worker_counts),
            "pulledTuples": dict(self.pulled_tuples),
            "cubes": self.n_cubes,
            "workers": self.n_workers,
            "levelStats": self.level_stats.as_dict() if self.level_stats else None,
            "precomputeSizes": dict(self.precompute_sizes),
            "manifest": self.manifest,
        }


class Cluster:
    """Persistent worker pool; start once, run many plans, shut down."""

    def __init__(self, n_workers: int, *, seed: int = 0, backend: str = "process",
                 latency_per_block: float = 0.0, spill_dir=None,
                 queue_size: int = 256):
        if n_workers < 1:
            raise ValueError("need at least one worker")
        if backend not in ("process", "thread"):
            raise ValueError(f"unknown backend {backend!r}")
        self.n = n_workers
        self.seed = seed
        self.backend = backend
        self.latency_per_block = latency_per_block
        self._tmp = None
        if spill_dir is None:
            self._tmp = tempfile.TemporaryDirectory(prefix="adj-spill-")
            spill_dir = self._tmp.name
        self.spill_dir = spill_dir
        self._procs = []
        self._started = False
        self._queue_size = queue_size

    # - lifecycle -

    def start(self):
        if self._started:
            return self
        if self.backend == "thread":
            import threading
            self.inboxes = [queue.Queue(self._queue_size) for _ in range(self.n)]
            self.coord_q = queue.Queue()
            for w in range(self.n):
                t = threading.Thread(
                    target=_worker_entry,
                    args=(w, self.n, self.inboxes, self.coord_q, self.spill_dir),
                    daemon=True,
                )
                t.start()
                self._procs.append(t)
        else:
            import multiprocessing as mp
            ctx = mp.get_context("fork")
            self.inboxes = [ctx.Queue(self._queue_size) for _ in range(self.n)]
            self.coord_q = ctx.Queue()
            for w in range(self.n):
                pr = ctx.Process(
                    target=_worker_entry,
                    args=(w, self.n, self.inboxes, self.coord_q, self.spill_dir),
                    daemon=True,
                )
                pr.start()
                self._procs.append(pr)
        self._started = True
        return self

    def shutdown(self):
        if not self._started:
            return
        for q in self.inboxes:
            try:
                q.put(Shutdown(), timeout=1.0)
            except queue.Full:
                pass
        for pr in self._procs:
            pr.join(timeout=5.0)
            if hasattr(pr, "terminate") and pr.is_alive():
                pr.terminate()
        self._procs = []
        self._started = False
        if self._tmp is not None:
            self._tmp.cleanup()
            self._tmp = None

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.shutdown()

    # - plumbing -

    def _broadcast(self, msg):
        for q in self.inboxes:
            q.put(msg)

    def _await(self, kind, phase):
        """Collect one report of `kind` from every worker."""
        got = {}
        while len(got) < self.n:
            rep = self.coord_q.get()
            if rep.kind == "error":
                self._abort_phase()
                self._raise_worker_error(rep, phase)
            if rep.kind != kind:
                raise ClusterError(phase, rep.worker,
                                   f"expected {kind}, got {rep.kind}")
            got[rep.worker] = rep.payload
        return [got[w] for w in range(self.n)]

    def _abort_phase(self):
        """Unwedge workers still serving the failed phase, then drain the
        stray reports they emit while recovering."""
        self._broadcast(TaskAssign("release", {}))
        deadline = time.perf_counter() + 0.5
        while time.perf_counter() < deadline:
            try:
                self.coord_q.get(timeout=0.1)
            except queue.Empty:
                break

    def _raise_worker_error(self, rep, phase):
        if rep.payload.get("type") == "MemoryBudgetExceeded":
            raise MemoryBudgetExceeded(*rep.payload["fields"])
        raise ClusterError(phase, rep.worker,
                           rep.payload.get("trace", "unknown failure"))

    # - stages -

    def _store(self, relations: dict):
        """Round-robin shard every relation across workers (row i to worker
        i mod N over the canonically sorted rows: deterministic)."""
        self.start()
        for w in range(self.n):
            shard = {name: rows[w::self.n] for name, rows in relations.items()}
            self.inboxes[w].put(TaskAssign("store", {"relations": shard}))
        self._await("store_done", "store")

    def _shuffle_join(self, atoms, share, ord_attrs, *, hash_kind, memory_tuples,
                      materialize, keep_as=None, keep_attrs=None, phase="execute"):
        """One full shuffle + join round. Returns (comm_s, comp_s, pulled,
        n_cubes, counts, merged stats, rows|None)."""
        payload = {
            "atoms": [(a.name, tuple(a.vars)) for a in atoms],
            "share_attrs": tuple(share.attrs),
            "share": tuple(share.shares),
            "hash_kind": hash_kind,
            "hash_seed": self.seed,
            "ord": tuple(ord_attrs),
            "latency_per_block": self.latency_per_block,
            "memory_tuples": memory_tuples,
        }
        t0 = time.perf_counter()
        self._broadcast(TaskAssign("shuffle", payload))
        pulled_reports = self._await("pulled", phase + ":communication")
        comm_s = time.perf_counter() - t0

        join_payload = {"materialize": materialize or keep_as is not None}
        if keep_as is not None:
            join_payload["keep_as"] = keep_as
            join_payload["keep_attrs"] = tuple(keep_attrs)
        t1 = time.perf_counter()
        self._broadcast(TaskAssign("join", join_payload))
        joined = self._await("joined", phase + ":computation")
        comp_s = time.perf_counter() - t1

        pulled = {}
        for reprt in pulled_reports:
            for name, cnt in reprt["pulled"].items():
                pulled[name] = pulled.get(name, 0) + cnt
        n_cubes = sum(r["n_cubes"] for r in pulled_reports)
        counts = [r["count"] for r in joined]
        stats = None
        for r in joined:
            st = LevelStats.from_dict(r["stats"])
            if stats is None:
                stats = st
            else:
                stats.merge(st)
        rows = None
        if materialize:
            parts = [r["rows"] for r in joined if r.get("rows") is not None]
            width = len(ord_attrs)
            rows = (np.concatenate(parts, axis=0) if parts
                    else np.empty((0, width), dtype=np.int64))
        return comm_s, comp_s, pulled, n_cubes, counts, stats, rows

    # - public operations -

    def execute_plan(self, plan: QueryPlan, db, *, materialize: bool = False,
                     hash_kind: str = "mod",
                     memory_tuples: int | None = None) -> ExecutionReport:
        """Run a plan end to end and report measured per-phase seconds."""
        self.start()
        base = {a.name: db.get(a.name).tuples for a in plan.query.atoms}
        self._store(base)

        mem = memory_tuples if memory_tuples is not None \
            else plan.params.memory_tuples

        pre_s = 0.0
        pre_sizes = {}
        for spec in plan.precomputed:
            sub = spec.sub_query
            t0 = time.perf_counter()
            _, _, _, _, counts, _, _ = self._shuffle_join(
                sub.atoms, spec.sub_share, spec.sub_order,
                hash_kind=hash_kind, memory_tuples=mem, materialize=False,
                keep_as=spec.name, keep_attrs=spec.attrs,
                phase=f"pre-compute:{spec.name}")
            pre_s += time.perf_counter() - t0
            pre_sizes[spec.name] = sum(counts)

        comm_s, comp_s, pulled, n_cubes, counts, stats, rows = self._shuffle_join(
            plan.rewritten.atoms, plan.share, plan.ord_attrs,
            hash_kind=hash_kind, memory_tuples=mem, materialize=materialize)

        if rows is not None and len(rows):
            perm = [plan.ord_attrs.index(a) for a in plan.query.attrs]
            rows = rows[:, perm]

        breakdown = CostBreakdown(
            optimization=plan.estimate.optimization,
            pre_computing=pre_s,
            communication=comm_s,
            computation=comp_s,
            measured=True,
        )
        total = sum(counts)
        report = ExecutionReport(
            breakdown=breakdown,
            result_count=total,
            per_worker_counts=counts,
            pulled_tuples=pulled,
            n_cubes=n_cubes,
            n_workers=self.n,
            level_stats=stats,
            precompute_sizes=pre_sizes,
            rows=rows,
        )
        assert sum(report.per_worker_counts) == report.result_count
        return report

    def measure_pull_volume(self, db, atoms, share: ShareVector,
                            *, hash_kind: str = "mod") -> dict:
        """Group + pull only; returns actually shipped tuple copies per
        relation (the |R| * dup(R, p) cross-check)."""
        self.start()
        self._store({a.name: db.get(a.name).tuples for a in atoms})
        payload = {
            "atoms": [(a.name, tuple(a.vars)) for a in atoms],
            "share_attrs": tuple(share.attrs),
            "share": tuple(share.shares),
            "hash_kind": hash_kind,
            "hash_seed": self.seed,
            "ord": None,
            "latency_per_block": 0.0,
            "memory_tuples": None,
            "pull_only": True,
        }
        self._broadcast(TaskAssign("shuffle", payload))
        reports = self._await("pulled", "pull-volume")
        self._broadcast(TaskAssign("release", {}))
        pulled = {}
        for rep in reports:
            for name, cnt in rep["pulled"].items():
                pulled[name] = pulled.get(name, 0) + cnt
        return pulled

    def make_sample_counter(self, db, q, ord_attrs):
        """Distributed per-value counting: the reduced database is shipped
        to every worker once; each sampled value is counted by one worker.
        Plugs into estimate_cardinality(counter=...)."""
        from .sampling import attribute_values, semijoin_reduce

        self.start()
        ord_attrs = tuple(ord_attrs)
        first = ord_attrs[0]
        vals = attribute_values(db, q, first)
        reduced = semijoin_reduce(db, q, first, vals)
        payload = {
            "atoms": [(a.name, tuple(a.vars)) for a in q.atoms],
            "ord": ord_attrs,
            "relations": {name: rel.tuples for name, rel in reduced.items()},
        }
        self._broadcast(TaskAssign("sample_prepare", payload))
        self._await("store_done", "sample-prepare")

        state = {"next": 0}

        def counter(value: int) -> LevelStats:
            token = state["next"]
            state["next"] += 1
            dest = token % self.n
            self.inboxes[dest].put(SampleTask(token, int(value)))
            rep = self.coord_q.get()
            if rep.kind == "error":
                self._raise_worker_error(rep, "sampling")
            assert rep.kind == "sample" and rep.payload["token"] == token
            return LevelStats.from_dict(rep.payload["stats"])

        return counter

    def calibrate_alpha(self, n_tuples: int = 1_000_000, seed: int = 0) -> float:
        """Tuples shipped per second through group + serialize + pull +
        deserialize, measured on a random binary relation spread over the
        grid (N*, 1): every tuple travels exactly once."""
        self.start()
        rng = np.random.default_rng(seed)
        rows = rng.integers(0, 2**62, size=(n_tuples, 2), dtype=np.int64)
        self._store({"ship": rows})
        share = ShareVector(("x", "y"), (self.n, 1))
        payload = {
            "atoms": [("ship", ("x", "y"))],
            "share_attrs": ("x", "y"),
            "share": tuple(share.shares),
            "hash_kind": "msw",
            "hash_seed": self.seed,
            "ord": None,
            "latency_per_block": 0.0,
            "memory_tuples": None,
            "pull_only": True,
        }
        t0 = time.perf_counter()
        self._broadcast(TaskAssign("shuffle", payload))
        reports = self._await("pulled", "calibrate-alpha")
        elapsed = time.perf_counter() - t0
        self._broadcast(TaskAssign("release", {}))
        shipped = sum(r["pulled"]["ship"] for r in reports)
        return shipped / elapsed
