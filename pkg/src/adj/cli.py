"""Command-line front end: plan, run, estimate, calibrate.

JSON-first output (``--table`` switches to text); exit codes are 0 success,
1 usage or parse failure, 2 binding or feasibility failure, 3 runtime abort.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from .cluster import Cluster, ClusterError
from .costmodel import (
    CostModelParams,
    calibrate_beta_table,
    calibration_cache_path,
    host_fingerprint,
    load_calibration,
    params_from_calibration,
    plan_query,
    save_calibration,
)
from .errors import (
    BindingError,
    FeasibilityError,
    MemoryBudgetExceeded,
    QueryParseError,
)
from .ghd import fractional_cover_number, query_edges
from .oracle import pairwise_join_oracle
from .query import QuerySpec, load_query
from .relation import Database, Relation, canonical_tuples
from .sampling import SampleConfig, estimate_cardinality

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BINDING = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit2(EXIT_USAGE, f"{self.prog}: error: {message}")


class SystemExit2(Exception):
    def __init__(self, code, message=None):
        self.code = code
        self.message = message


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="adj", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, *, cluster=True):
        p.add_argument("--query", required=True,
                       help="built-in name (q1..q6) or a .query file")
        p.add_argument("--bind", action="append", default=[], metavar="R=PATH",
                       help="bind one atom to a dataset file (repeatable)")
        p.add_argument("--graph", help="bind every atom to this edge list")
        p.add_argument("--workers", type=int, default=1, metavar="N")
        p.add_argument("--samples", type=int, default=None, metavar="K")
        p.add_argument("--eps", type=float, default=None)
        p.add_argument("--delta", type=float, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--memory-tuples", type=int, default=None, metavar="M")
        p.add_argument("--json", action="store_true", default=True,
                       help="JSON output (default)")
        p.add_argument("--table", action="store_true",
                       help="human-readable table instead of JSON")
        if cluster:
            p.add_argument("--mode", choices=("adj", "hcube-lf", "oracle"),
                           default="adj")
            p.add_argument("--hash", choices=("mod", "msw"), default="mod")
            p.add_argument("--latency-per-block", type=float, default=0.0,
                           metavar="SECS")
            p.add_argument("--backend", choices=("process", "thread"),
                           default="process")

    p_plan = sub.add_parser("plan", help="choose and print a query plan")
    common(p_plan)
    p_plan.add_argument("--explain", action="store_true",
                        help="print the decomposition tree as text")

    p_run = sub.add_parser("run", help="execute a query on the cluster")
    common(p_run)
    p_run.add_argument("--materialize", metavar="OUT.TSV",
                       help="write result tuples to a file")

    p_est = sub.add_parser("estimate", help="sampling cardinality estimate")
    common(p_est, cluster=False)
    p_est.add_argument("--order", help="comma-separated attribute order")
    p_est.add_argument("--exhaustive", action="store_true",
                       help="force the exact exhaustive pass")

    p_cal = sub.add_parser("calibrate",
                           help="measure alpha and the beta ladder")
    p_cal.add_argument("--workers", type=int, default=2)
    p_cal.add_argument("--seed", type=int, default=0)
    p_cal.add_argument("--backend", choices=("process", "thread"),
                       default="process")
    p_cal.add_argument("--tuples", type=int, default=1_000_000,
                       help="tuples shipped for the alpha measurement")
    p_cal.add_argument("--force", action="store_true",
                       help="re-measure even when a cache entry exists")
    p_cal.add_argument("--table", action="store_true")
    return top


# --- manifest assembly ------------------------------------------------------


def _load_table(path, arity: int, name: str) -> Relation:
    rows = np.loadtxt(path, dtype=np.int64, comments="#", ndmin=2)
    if rows.size == 0:
        rows = np.empty((0, arity), dtype=np.int64)
    if rows.shape[1] != arity:
        raise BindingError(
            f"{path}: {rows.shape[1]} columns, but atom {name} has arity {arity}")
    schema = tuple(f"c{i}" for i in range(arity))
    return Relation(name, schema, canonical_tuples(rows, arity))


def bind_database(q: QuerySpec, args) -> tuple[Database, dict]:
    bindings = {}
    for spec in args.bind:
        name, sep, path = spec.partition("=")
        if not sep or not name or not path:
            raise SystemExit2(EXIT_USAGE, f"--bind expects R=PATH, got {spec!r}")
        bindings[name] = path
    db = Database()
    echo = {}
    for atom in q.atoms:
        if atom.name in bindings:
            src = bindings[atom.name]
        elif args.graph:
            src = args.graph
        else:
            raise BindingError(
                f"atom {atom.name} has no dataset: pass --bind "
                f"{atom.name}=PATH or --graph")
        db.add(_load_table(src, len(atom.vars), atom.name))
        echo[atom.name] = src
    unknown = set(bindings) - {a.name for a in q.atoms}
    if unknown:
        raise BindingError(f"--bind names no atom of the query: {sorted(unknown)}")
    return db, echo


def _sample_config(args) -> SampleConfig:
    return SampleConfig(k=args.samples, eps=args.eps, delta=args.delta,
                        seed=args.seed)


def _manifest(args, q, echo, params: CostModelParams) -> dict:
    return {
        "query": str(q),
        "bindings": echo,
        "workers": args.workers,
        "mode": getattr(args, "mode", None),
        "samples": _sample_config(args).effective_k,
        "seed": args.seed,
        "hash": getattr(args, "hash", None),
        "memoryTuples": args.memory_tuples,
        "alpha": params.alpha,
        "betaTable": {str(s): r for s, r in params.beta_table},
    }


def _emit(payload: dict, as_table: bool, table_text: str | None = None):
    if as_table and table_text is not None:
        print(table_text)
    else:
        print(json.dumps(payload, indent=2))


def _breakdown_table(bd: dict) -> str:
    cols = ["Optimization", "Pre-Computing", "Communication", "Computation",
            "Total"]
    head = "  ".join(f"{c:>14}" for c in cols)
    vals = "  ".join(f"{bd[c]:>14.4f}" for c in cols)
    return head + "\n" + vals


# --- subcommands -------------------------------------------------------------


def _explain_tree(q: QuerySpec, tree) -> str:
    edges = query_edges(q)
    adj = tree.adjacency()
    seen = set()
    lines = []

    def rec(v, depth):
        seen.add(v)
        bag = tree.bags[v]
        lam = ", ".join(q.atoms[i].name for i in tree.lambdas[v])
        rho = fractional_cover_number(frozenset(bag), edges)
        lines.append("  " * depth
                     + f"node {v}: bag {{{', '.join(bag)}}} "
                     + f"lambda {{{lam}}} cover {rho}")
        for w in sorted(adj[v]):
            if w not in seen:
                rec(w, depth + 1)

    rec(0, 0)
    return "\n".join(lines)


def cmd_plan(args) -> int:
    q = load_query(args.query)
    db, echo = bind_database(q, args)
    params = params_from_calibration(args.workers, args.memory_tuples)
    plan = plan_query(db, q, params, _sample_config(args),
                      allow_precompute=(args.mode == "adj"))
    payload = plan.as_dict()
    payload["manifest"] = _manifest(args, q, echo, params)
    if args.explain:
        print(_explain_tree(q, plan.tree))
        print(f"precomputed: {[p.name for p in plan.precomputed] or 'none'}")
        print(f"order: {' < '.join(plan.ord_attrs)}")
        print(f"share: {dict(zip(plan.share.attrs, plan.share.shares))}")
        print(_breakdown_table(plan.estimate.as_dict()))
        return EXIT_OK
    table = (_explain_tree(q, plan.tree) + "\n"
             + _breakdown_table(plan.estimate.as_dict()))
    _emit(payload, args.table, table)
    return EXIT_OK


def cmd_run(args) -> int:
    q = load_query(args.query)
    db, echo = bind_database(q, args)
    params = params_from_calibration(args.workers, args.memory_tuples)
    materialize = bool(args.materialize)

    if args.mode == "oracle":
        t0 = time.perf_counter()
        result = pairwise_join_oracle(db, q)
        elapsed = time.perf_counter() - t0
        rows = np.asarray(sorted(result), dtype=np.int64) if result else \
            np.empty((0, len(q.attrs)), dtype=np.int64)
        payload = {
            "mode": "oracle",
            "resultCount": len(result),
            "seconds": elapsed,
            "manifest": _manifest(args, q, echo, params),
        }
        if materialize:
            _write_tsv(args.materialize, rows)
            payload["materialized"] = args.materialize
        _emit(payload, args.table,
              f"oracle: {len(result)} tuples in {elapsed:.4f}s")
        return EXIT_OK

    plan = plan_query(db, q, params, _sample_config(args),
                      allow_precompute=(args.mode == "adj"))
    with Cluster(args.workers, seed=args.seed, backend=args.backend,
                 latency_per_block=args.latency_per_block) as cluster:
        report = cluster.execute_plan(
            plan, db, materialize=materialize, hash_kind=args.hash,
            memory_tuples=args.memory_tuples)
    report.manifest = _manifest(args, q, echo, params)
    payload = report.as_dict()
    payload["mode"] = args.mode
    payload["plan"] = plan.as_dict()
    if materialize:
        _write_tsv(args.materialize, report.rows)
        payload["materialized"] = args.materialize
    table = (f"{args.mode}: {report.result_count} tuples on "
             f"{report.n_workers} workers ({report.n_cubes} cubes)\n"
             + _breakdown_table(payload["breakdown"]))
    _emit(payload, args.table, table)
    return EXIT_OK


def _write_tsv(path, rows):
    with open(path, "w") as fh:
        for row in np.asarray(rows, dtype=np.int64):
            fh.write("\t".join(str(int(v)) for v in row) + "\n")


def cmd_estimate(args) -> int:
    q = load_query(args.query)
    db, echo = bind_database(q, args)
    params = params_from_calibration(args.workers, args.memory_tuples)
    cfg = _sample_config(args)
    if args.order:
        ord_attrs = tuple(a.strip() for a in args.order.split(","))
        bad = set(ord_attrs) - set(q.attrs)
        if bad or len(ord_attrs) != len(set(ord_attrs)):
            raise SystemExit2(EXIT_USAGE,
                              f"--order must be distinct attributes of the "
                              f"query; offending: {sorted(bad)}")
    else:
        plan = plan_query(db, q, params, cfg, allow_precompute=False)
        ord_attrs = plan.ord_attrs
    if args.exhaustive:
        # k at least |val(A)| forces the exact pass
        from .sampling import attribute_values
        n_val = len(attribute_values(db, q, ord_attrs[0]))
        cfg = SampleConfig(k=max(n_val, 1), seed=args.seed)
    t0 = time.perf_counter()
    est = estimate_cardinality(db, q, ord_attrs, cfg)
    elapsed = time.perf_counter() - t0
    payload = est.as_dict()
    payload["order"] = list(ord_attrs)
    payload["wallSeconds"] = elapsed
    payload["manifest"] = _manifest(args, q, echo, params)
    lo, hi = est.heuristic_interval()
    _emit(payload, args.table,
          f"estimate {est.value:.1f} (valCount {est.val_count}, k "
          f"{est.samples}, interval [{lo:.1f}, {hi:.1f}]) in {elapsed:.3f}s")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cached = load_calibration()
    if cached is not None and not args.force:
        payload = dict(cached)
        payload["cacheFile"] = str(calibration_cache_path())
        payload["reused"] = True
        _emit(payload, args.table,
              f"reusing calibration {payload['cacheFile']}")
        return EXIT_OK
    beta = calibrate_beta_table(seed=args.seed)
    with Cluster(args.workers, seed=args.seed, backend=args.backend) as cl:
        half = max(args.tuples // 2, 1)
        a1 = cl.calibrate_alpha(n_tuples=half, seed=args.seed)
        a2 = cl.calibrate_alpha(n_tuples=half, seed=args.seed + 1)
    alpha = (a1 + a2) / 2
    if max(a1, a2) / min(a1, a2) > 1.5:
        print(f"warning: alpha measurements differ widely "
              f"({a1:,.0f} vs {a2:,.0f} tuples/s)", file=sys.stderr)
    path = save_calibration(alpha, beta)
    payload = {
        "alpha": alpha,
        "beta": {str(k): v for k, v in beta.items()},
        "fingerprint": host_fingerprint(),
        "cacheFile": str(path),
        "reused": False,
    }
    _emit(payload, args.table,
          f"alpha {alpha:,.0f} tuples/s; beta "
          + ", ".join(f"{k}: {v:,.0f}" for k, v in beta.items()))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "plan": cmd_plan,
            "run": cmd_run,
            "estimate": cmd_estimate,
            "calibrate": cmd_calibrate,
        }[args.command]
        return handler(args)
    except SystemExit2 as e:
        if e.message:
            print(e.message, file=sys.stderr)
        return e.code
    except QueryParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (BindingError, FeasibilityError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BINDING
    except (MemoryBudgetExceeded, ClusterError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BINDING


if __name__ == "__main__":
    sys.exit(main())
