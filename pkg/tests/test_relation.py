import numpy as np
import pytest

from adj.errors import BindingError
from adj.relation import Database, Relation, canonical_tuples, load_edge_list


def test_canonical_sorts_and_dedups():
    rows = [(3, 1), (1, 2), (3, 1), (1, 1)]
    arr = canonical_tuples(rows, 2)
    assert arr.tolist() == [[1, 1], [1, 2], [3, 1]]
    assert arr.dtype == np.int64


def test_canonical_empty():
    arr = canonical_tuples([], 3)
    assert arr.shape == (0, 3)


def test_canonical_arity_mismatch():
    with pytest.raises(BindingError):
        canonical_tuples([(1, 2, 3)], 2)


def test_relation_tuple_set_and_arity():
    r = Relation("R", ("x", "y"), canonical_tuples([(1, 2), (2, 3)], 2))
    assert r.arity == 2
    assert r.tuple_set() == {(1, 2), (2, 3)}
    assert set(r.project_column(0)) == {1, 2}


def test_database_for_graph_binds_every_atom(graph300):
    db = Database.for_graph(["R1", "R2", "R3"], graph300)
    assert set(db.relations) == {"R1", "R2", "R3"}
    for name in ("R1", "R2", "R3"):
        assert db.get(name).tuple_set() == graph300.tuple_set()


def test_database_get_unknown_raises(toy_db):
    with pytest.raises(BindingError):
        toy_db.get("R999")


def test_load_edge_list_skips_comments(tmp_path):
    p = tmp_path / "g.tsv"
    p.write_text("# a comment\n1\t2\n2\t3\n1\t2\n")
    r = load_edge_list(p, name="G")
    assert r.name == "G"
    assert r.tuple_set() == {(1, 2), (2, 3)}
