from fractions import Fraction
from itertools import permutations

import pytest

from adj.ghd import (candidate_nodes, candidate_subsets, check_invariants,
                     enumerate_ghds, fhw, fractional_cover_number,
                     is_valid_order, order_from_traversal, query_edges,
                     select_optimal, traversal_orders, valid_orders)
from adj.query import builtin_query, parse_query


def selected(q):
    return select_optimal(enumerate_ghds(q), q)


def test_toy_selected_tree(toy_query):
    tree = selected(toy_query)
    assert [set(b) for b in tree.bags] == [
        {"a", "b", "c"}, {"a", "c", "d"}, {"b", "c", "e"}]
    assert [set(l) for l in tree.lambdas] == [{0}, {1, 2}, {3, 4}]
    assert fhw(tree, toy_query) == Fraction(3, 2)


def test_toy_candidates(toy_query):
    tree = selected(toy_query)
    # only bags holding >= 2 atoms are worth materializing
    assert candidate_nodes(tree) == [1, 2]
    assert candidate_subsets(tree) == [(), (1,), (2,), (1, 2)]


def test_toy_order_validity(toy_query):
    tree = selected(toy_query)
    assert is_valid_order(tree, toy_query, ("a", "b", "c", "d", "e"))
    assert not is_valid_order(tree, toy_query, ("a", "b", "e", "d", "c"))


def test_valid_orders_consistent_with_membership(toy_query):
    tree = selected(toy_query)
    valid = set(valid_orders(tree, toy_query))
    assert valid  # at least one traversal order exists
    for p in permutations(toy_query.attrs):
        assert (p in valid) == is_valid_order(tree, toy_query, p)


def test_orders_come_from_traversals(toy_query):
    tree = selected(toy_query)
    for trav in traversal_orders(tree):
        assert trav[0] == 0 or trav[0] in range(tree.n_nodes)
        order = order_from_traversal(tree, trav)
        assert is_valid_order(tree, toy_query, order)


def test_triangle_single_node():
    q = builtin_query("q1")
    tree = selected(q)
    assert tree.n_nodes == 1
    assert set(tree.bags[0]) == {"a", "b", "c"}
    assert fhw(tree, q) == Fraction(3, 2)
    # a single-node tree offers nothing to precompute
    assert candidate_nodes(tree) == []
    assert candidate_subsets(tree) == [()]


def test_every_enumerated_tree_satisfies_invariants(toy_query):
    trees = enumerate_ghds(toy_query)
    assert len(trees) == 20
    for t in trees:
        check_invariants(t, toy_query)


@pytest.mark.parametrize("name", ["q1", "q2", "q4", "q5", "q6"])
def test_builtin_invariants_and_order_sanity(name):
    q = builtin_query(name)
    tree = selected(q)
    check_invariants(tree, q)
    trav = traversal_orders(tree)[0]
    order = order_from_traversal(tree, trav)
    assert sorted(order) == sorted(q.attrs)
    assert is_valid_order(tree, q, order)


def test_identity_order_of_selected_tree_is_valid(toy_query):
    # the planner walks nodes in traversal order; node 0 first must be valid
    tree = selected(toy_query)
    for trav in traversal_orders(tree)[:10]:
        assert is_valid_order(tree, toy_query, order_from_traversal(tree, trav))


def test_fractional_cover_numbers():
    # one edge covering the whole bag
    assert fractional_cover_number(
        frozenset("ab"), frozenset([frozenset("ab")])) == 1
    # triangle: optimum picks each edge with weight 1/2
    tri = frozenset([frozenset("ab"), frozenset("bc"), frozenset("ac")])
    assert fractional_cover_number(frozenset("abc"), tri) == Fraction(3, 2)
    # 5-cycle: known cover number 5/2
    cyc = frozenset([frozenset(p) for p in ("ab", "bc", "cd", "de", "ea")])
    assert fractional_cover_number(frozenset("abcde"), cyc) == Fraction(5, 2)


def test_query_edges_shape(toy_query):
    edges = query_edges(toy_query)
    assert frozenset({"a", "b", "c"}) in edges
    assert len(edges) == 5


def test_oversized_query_rejected():
    from adj.errors import PlanLimitError
    atoms = ", ".join(f"R{i}(x{i},x{i+1})" for i in range(12))
    q = parse_query(f"Q(x0) :- {atoms}.")
    with pytest.raises(PlanLimitError):
        enumerate_ghds(q)


def test_enumeration_cap_truncates():
    # the cap bounds work on adversarial queries instead of raising; a
    # truncated enumeration still yields the always-present flat tree
    q = builtin_query("q3")
    ts = enumerate_ghds(q, cap=3)
    assert 0 < len(ts) <= 3
    best = select_optimal(ts, q)
    check_invariants(best, q)


def test_selection_is_deterministic(toy_query):
    a = select_optimal(enumerate_ghds(toy_query), toy_query)
    b = select_optimal(list(reversed(enumerate_ghds(toy_query))), toy_query)
    assert a.bags == b.bags and a.lambdas == b.lambdas and a.edges == b.edges
