import pytest
from hypothesis import given, strategies as st

from adj.errors import QueryParseError
from adj.query import (builtin_query, format_query, hypergraph_of, load_query,
                       parse_query)

Q1_TEXT = "Q1(a,b,c) :- R1(a,b), R2(b,c), R3(a,c)."


def test_parse_basic():
    q = parse_query(Q1_TEXT)
    assert q.name == "Q1"
    assert q.attrs == ("a", "b", "c")
    assert [a.name for a in q.atoms] == ["R1", "R2", "R3"]
    assert q.atoms[2].vars == ("a", "c")


def test_format_round_trip():
    q = parse_query(Q1_TEXT)
    assert parse_query(format_query(q)) == q


def test_parse_whitespace_and_newlines():
    q = parse_query("Q ( a , b ) :-\n  R ( a , b ),\n  S ( b , a ) .")
    assert q.attrs == ("a", "b")
    assert len(q.atoms) == 2


@pytest.mark.parametrize("bad", [
    "",
    "Q(a)",                      # no body
    "Q(a) :- R(a",               # unbalanced
    "Q(a) :- .",                 # empty body
    "Q(a) :- R(a).extra",        # trailing junk
    "Q(a) :- R(a,a), S(a,b).",   # repeated var inside one atom
    "Q(a) :- R(a,b), R(b,c).",   # duplicate atom name
    "1Q(a) :- R(a).",            # bad identifier
])
def test_parse_rejects(bad):
    with pytest.raises(QueryParseError):
        parse_query(bad)


def test_single_atom_rejected():
    # joins need at least two atoms
    with pytest.raises(QueryParseError):
        parse_query("Q(a,b) :- R(a,b).")


def test_head_vars_are_cosmetic():
    # the output schema is the union of body vars in first-appearance order
    q = parse_query("Q(x) :- R(b,c), S(c,d).")
    assert q.attrs == ("b", "c", "d")


def test_builtin_queries_all_parse():
    for name in ("q1", "q2", "q3", "q4", "q5", "q6"):
        q = builtin_query(name)
        assert len(q.atoms) >= 2
        g = hypergraph_of(q)
        assert g.is_connected()
        assert set(g.nodes) == set(q.attrs)


def test_load_query_from_file(tmp_path):
    p = tmp_path / "my.query"
    p.write_text(Q1_TEXT + "\n")
    assert load_query(p) == parse_query(Q1_TEXT)
    assert load_query(str(p)) == parse_query(Q1_TEXT)


def test_load_query_unknown_name():
    with pytest.raises((QueryParseError, OSError)):
        load_query("no_such_query_anywhere")


def test_hypergraph_edges_match_atoms():
    q = parse_query(Q1_TEXT)
    g = hypergraph_of(q)
    assert g.edges_containing("b") == [0, 1]  # atom indices of R1, R2


ident = st.from_regex(r"[a-z][a-z0-9_]{0,4}", fullmatch=True)


@given(st.lists(ident, min_size=2, max_size=5, unique=True), st.integers(0, 10))
def test_parse_format_inverse_on_generated_chains(attrs, seed):
    atoms = ", ".join(
        f"R{i}({attrs[i]},{attrs[(i + 1) % len(attrs)]})" for i in range(len(attrs)))
    text = f"Q({','.join(attrs)}) :- {atoms}."
    q = parse_query(text)
    assert parse_query(format_query(q)) == q
