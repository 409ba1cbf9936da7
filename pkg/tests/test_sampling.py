import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adj.ghd import enumerate_ghds, select_optimal
from adj.oracle import pairwise_join_oracle
from adj.query import builtin_query, parse_query
from adj.relation import Database, Relation, canonical_tuples
from adj.sampling import (PrefixEstimator, SampleConfig, attribute_values,
                          chernoff_sample_size, collect_prefix_stats,
                          estimate_cardinality, semijoin_reduce)

TRIANGLE = builtin_query("q1")


def triangle_db(graph):
    return Database.for_graph([a.name for a in TRIANGLE.atoms], graph)


def test_attribute_values_is_projection_intersection(toy_db, toy_query):
    # val(a) = pi_a(R1) n pi_a(R2) = {1,2} n {1,4}
    assert attribute_values(toy_db, toy_query, "a").tolist() == [1]
    # val(c) also intersects R5's projection {2,4,5,6}
    assert attribute_values(toy_db, toy_query, "c").tolist() == [2]


def test_exhaustive_when_values_fit_in_budget(graph300):
    db = triangle_db(graph300)
    true = len(pairwise_join_oracle(db, TRIANGLE))
    est = estimate_cardinality(db, TRIANGLE, TRIANGLE.attrs, SampleConfig(k=10**6))
    assert est.exact
    assert est.value == true
    assert est.samples == 0  # one full run, no per-value draws


def test_sampled_estimate_is_deterministic(graph300):
    db = triangle_db(graph300)
    cfg = SampleConfig(k=20, seed=42)
    a = estimate_cardinality(db, TRIANGLE, TRIANGLE.attrs, cfg)
    b = estimate_cardinality(db, TRIANGLE, TRIANGLE.attrs, cfg)
    assert a.value == b.value and a.sample_mean == b.sample_mean
    c = estimate_cardinality(db, TRIANGLE, TRIANGLE.attrs, SampleConfig(k=20, seed=43))
    assert (a.value != c.value) or (a.sample_max != c.sample_max)


def test_estimate_is_valcount_times_mean(graph300):
    db = triangle_db(graph300)
    est = estimate_cardinality(db, TRIANGLE, TRIANGLE.attrs, SampleConfig(k=25, seed=3))
    assert est.value == pytest.approx(est.val_count * est.sample_mean)
    assert not est.exact and est.samples == 25


def test_mean_over_seeds_tracks_truth(graph300):
    # scaled-down unbiasedness check; the acceptance suite runs the full one
    db = triangle_db(graph300)
    true = len(pairwise_join_oracle(db, TRIANGLE))
    vals = [estimate_cardinality(db, TRIANGLE, TRIANGLE.attrs,
                                 SampleConfig(k=15, seed=s)).value
            for s in range(60)]
    assert np.mean(vals) == pytest.approx(true, rel=0.15)


def test_empty_value_set_short_circuits():
    db = Database()
    db.add(Relation("R1", ("a", "b"), canonical_tuples([(1, 2)], 2)))
    db.add(Relation("R2", ("b", "c"), canonical_tuples([(2, 6)], 2)))
    db.add(Relation("R3", ("a", "c"), canonical_tuples([(7, 6)], 2)))
    est = estimate_cardinality(db, TRIANGLE, TRIANGLE.attrs, SampleConfig(k=10))
    assert est.exact and est.value == 0 and est.val_count == 0
    assert est.samples == 0


def test_nonempty_values_but_empty_join_is_exact_zero():
    db = Database()
    db.add(Relation("R1", ("a", "b"), canonical_tuples([(1, 2)], 2)))
    db.add(Relation("R2", ("b", "c"), canonical_tuples([(5, 6)], 2)))
    db.add(Relation("R3", ("a", "c"), canonical_tuples([(1, 6)], 2)))
    est = estimate_cardinality(db, TRIANGLE, TRIANGLE.attrs, SampleConfig(k=10))
    assert est.exact and est.value == 0 and est.val_count == 1


def test_chernoff_sample_size_frozen_and_monotone():
    assert chernoff_sample_size(0.1, 0.05) == 185
    assert chernoff_sample_size(0.05, 0.05) > chernoff_sample_size(0.1, 0.05)
    assert chernoff_sample_size(0.1, 0.01) > chernoff_sample_size(0.1, 0.05)


def test_sample_config_resolution():
    assert SampleConfig().effective_k == 10**5
    assert SampleConfig(k=77).effective_k == 77
    assert SampleConfig(eps=0.1, delta=0.05).effective_k == 185
    assert SampleConfig(eps=0.1).effective_k == 10**5  # delta missing: default
    with pytest.raises(ValueError):
        SampleConfig(k=0).effective_k


def test_heuristic_interval_halfwidth(graph300):
    db = triangle_db(graph300)
    est = estimate_cardinality(db, TRIANGLE, TRIANGLE.attrs, SampleConfig(k=30, seed=9))
    delta = 0.05
    lo, hi = est.heuristic_interval(delta)
    half = est.val_count * est.sample_max * math.sqrt(math.log(2 / delta) / (2 * 30))
    assert hi - est.value == pytest.approx(half)
    assert lo == max(0.0, est.value - half)


def test_exact_interval_is_a_point(graph300):
    db = triangle_db(graph300)
    est = estimate_cardinality(db, TRIANGLE, TRIANGLE.attrs, SampleConfig(k=10**6))
    assert est.heuristic_interval(0.05) == (est.value, est.value)


def test_counter_plugin_sees_each_sampled_value(graph300):
    db = triangle_db(graph300)
    calls = []
    from adj.leapfrog import LevelStats, lf_join_fixed, ordered_attrs
    from adj.trie import build_trie

    tries = []
    for atom in TRIANGLE.atoms:
        named = Relation(atom.name, atom.vars, db.get(atom.name).tuples)
        tries.append(build_trie(named, ordered_attrs(atom.vars, TRIANGLE.attrs)))

    def counter(value):
        calls.append(value)
        stats = LevelStats(TRIANGLE.attrs)
        lf_join_fixed(tries, TRIANGLE.attrs, value, stats=stats)
        return stats

    est = estimate_cardinality(db, TRIANGLE, TRIANGLE.attrs,
                               SampleConfig(k=12, seed=4), counter=counter)
    # draws are with replacement; the counter runs once per distinct value
    assert 0 < len(calls) <= 12 and len(calls) == len(set(calls))
    ref = estimate_cardinality(db, TRIANGLE, TRIANGLE.attrs, SampleConfig(k=12, seed=4))
    assert est.value == ref.value  # plug-in path must not change the math


@given(st.lists(st.tuples(st.integers(0, 8), st.integers(0, 8)),
                min_size=1, max_size=40), st.sampled_from(["a", "b", "c"]))
@settings(max_examples=40, deadline=None)
def test_semijoin_reduce_preserves_result(edges, attr):
    db = triangle_db(Relation("E", ("x", "y"),
                              canonical_tuples(edges, 2)))
    before = pairwise_join_oracle(db, TRIANGLE)
    reduced = semijoin_reduce(db, TRIANGLE, attr,
                              attribute_values(db, TRIANGLE, attr))
    after = pairwise_join_oracle(reduced, TRIANGLE)
    assert after == before
    for atom in TRIANGLE.atoms:
        assert reduced.get(atom.name).tuples.shape[0] <= \
            db.get(atom.name).tuples.shape[0]


def test_prefix_estimator_memoizes(toy_db, toy_query):
    tree = select_optimal(enumerate_ghds(toy_query), toy_query)
    pe = PrefixEstimator(toy_db, toy_query, tree, SampleConfig(k=50, seed=0))
    nodes = (0,)
    a = pe.stats_for(nodes)
    b = pe.stats_for(nodes)
    assert a is b  # one pass per (prefix, last) pair


def test_prefix_stats_estimates_full_prefix_counts(toy_db, toy_query):
    tree = select_optimal(enumerate_ghds(toy_query), toy_query)
    pe = PrefixEstimator(toy_db, toy_query, tree, SampleConfig(k=10**6, seed=0))
    stats = pe.stats_for((0, 1, 2))
    # exhaustive sampling: the full three-node prefix count is the true |Q|
    assert stats.bindings_after(2) == pytest.approx(2.0)
