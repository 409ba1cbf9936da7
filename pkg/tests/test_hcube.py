from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adj.hcube import (HashFamily, ShareVector, assign_coordinates,
                       coordinate_restriction, coordinates_matching, dup,
                       enumerate_coordinates, frac, group_blocks, signature_of)

TOY_SHARE = ShareVector(("a", "b", "c", "d", "e"), (1, 2, 2, 1, 1))


def test_share_vector_basics():
    assert TOY_SHARE.P == 4
    assert TOY_SHARE.share_of("b") == 2
    assert TOY_SHARE.indices_of(("c", "d")) == (2, 3)


def test_share_vector_rejects_bad_shares():
    with pytest.raises(ValueError):
        ShareVector(("a",), (0,))
    with pytest.raises(ValueError):
        ShareVector(("a", "b"), (2,))


def test_dup_and_frac():
    # an atom is duplicated across the shares of the attrs it does not cover
    assert dup(TOY_SHARE, ("a", "b", "c")) == 1
    assert dup(TOY_SHARE, ("c", "d")) == 2
    assert dup(TOY_SHARE, ("d", "e")) == 4
    assert frac(TOY_SHARE, ("c", "d")) == Fraction(1, 2)
    assert frac(TOY_SHARE, ("a", "b", "c")) == Fraction(1, 4)


def test_enumerate_coordinates_lexicographic():
    coords = enumerate_coordinates(TOY_SHARE)
    assert coords == sorted(coords)
    assert len(coords) == TOY_SHARE.P
    assert coords[0] == (0, 0, 0, 0, 0)


def test_assign_coordinates_round_robin():
    per_worker = assign_coordinates(TOY_SHARE, 3)
    coords = enumerate_coordinates(TOY_SHARE)
    assert per_worker[0] == [coords[0], coords[3]]
    assert per_worker[1] == [coords[1]]
    assert per_worker[2] == [coords[2]]
    # every coordinate appears exactly once across workers
    flat = [c for ws in per_worker for c in ws]
    assert sorted(flat) == coords


def test_toy_r3_blocks_and_fanout():
    """R3(c,d) of the running example under p=(1,2,2,1,1), mod hashing:
    two blocks, each shipped to the two cubes matching its signature."""
    h = HashFamily("mod")
    idx = TOY_SHARE.indices_of(("c", "d"))
    rows = np.array([[1, 1], [1, 2], [2, 1], [2, 2]])
    blocks = group_blocks(rows, idx, TOY_SHARE, h)
    assert {k: sorted(map(tuple, v)) for k, v in blocks.items()} == {
        (0, 0): [(2, 1), (2, 2)],
        (1, 0): [(1, 1), (1, 2)],
    }
    # fanout = dup = 2 coordinates per block (b is free, two b-slots)
    for sig in blocks:
        assert len(coordinates_matching(TOY_SHARE, idx, sig)) == 2
    # total copies = |R3| * dup = 8
    copies = sum(len(coordinates_matching(TOY_SHARE, idx, sig)) * len(rows_)
                 for sig, rows_ in blocks.items())
    assert copies == len(rows) * dup(TOY_SHARE, ("c", "d")) == 8


def test_toy_r1_single_destination():
    # R1 covers every sharded attr, so each tuple lands on exactly one cube
    h = HashFamily("mod")
    idx = TOY_SHARE.indices_of(("a", "b", "c"))
    sig = signature_of((1, 2, 2), idx, TOY_SHARE, h)
    assert sig == (0, 0, 0)
    assert coordinates_matching(TOY_SHARE, idx, sig) == [(0, 0, 0, 0, 0)]


def test_restriction_inverts_matching():
    h = HashFamily("mod")
    idx = TOY_SHARE.indices_of(("c", "d"))
    sig = signature_of((1, 1), idx, TOY_SHARE, h)
    for coord in coordinates_matching(TOY_SHARE, idx, sig):
        assert coordinate_restriction(coord, idx) == sig


shares_strategy = st.lists(st.integers(1, 3), min_size=2, max_size=4)
rows_strategy = st.lists(st.tuples(st.integers(-100, 100), st.integers(-100, 100)),
                         min_size=1, max_size=80)


@given(rows_strategy, shares_strategy, st.sampled_from(["mod", "msw"]), st.integers(0, 5))
@settings(max_examples=60, deadline=None)
def test_blocks_partition_the_relation(rows, shares, kind, seed):
    attrs = tuple(f"x{i}" for i in range(len(shares)))
    sv = ShareVector(attrs, tuple(shares))
    h = HashFamily(kind, seed=seed)
    arr = np.unique(np.array(rows, dtype=np.int64), axis=0)
    idx = sv.indices_of(attrs[:2])
    blocks = group_blocks(arr, idx, sv, h)
    got = sorted(t for b in blocks.values() for t in map(tuple, b))
    assert got == sorted(map(tuple, arr))    # cover, no dup inside a signature
    for sig, b in blocks.items():
        assert len(b)                        # no empty blocks emitted
        for row in b:
            assert signature_of(tuple(row), idx, sv, h) == sig


@given(rows_strategy, shares_strategy, st.sampled_from(["mod", "msw"]), st.integers(0, 5))
@settings(max_examples=60, deadline=None)
def test_volume_identity(rows, shares, kind, seed):
    """Copies over all cubes equal |R| * dup exactly, whatever the hashing."""
    attrs = tuple(f"x{i}" for i in range(len(shares)))
    sv = ShareVector(attrs, tuple(shares))
    h = HashFamily(kind, seed=seed)
    arr = np.unique(np.array(rows, dtype=np.int64), axis=0)
    idx = sv.indices_of(attrs[:2])
    blocks = group_blocks(arr, idx, sv, h)
    copies = sum(len(coordinates_matching(sv, idx, sig)) * len(b)
                 for sig, b in blocks.items())
    assert copies == len(arr) * dup(sv, attrs[:2])


@given(st.lists(st.integers(-10**9, 10**9), min_size=1, max_size=50),
       st.integers(1, 5), st.integers(0, 3), st.integers(0, 4))
def test_hash_family_scalar_vector_agree(values, share, seed, attr_idx):
    for kind in ("mod", "msw"):
        h = HashFamily(kind, seed=seed)
        vec = h.column(attr_idx, np.array(values, dtype=np.int64), share)
        assert list(vec) == [h.value(attr_idx, v, share) for v in values]
        assert all(0 <= b < share for b in vec)


def test_msw_seed_and_attr_change_buckets():
    vals = np.arange(1000, dtype=np.int64)
    a = HashFamily("msw", seed=1).column(0, vals, 4)
    b = HashFamily("msw", seed=2).column(0, vals, 4)
    c = HashFamily("msw", seed=1).column(1, vals, 4)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)  # correlated columns must spread apart


def test_mod_is_seed_free_and_stable():
    vals = np.array([0, 1, 5, 3, 17], dtype=np.int64)
    a = HashFamily("mod", seed=1).column(0, vals, 4)
    b = HashFamily("mod", seed=9).column(2, vals, 4)
    assert np.array_equal(a, b)
    assert list(a) == [v % 4 for v in [0, 1, 5, 3, 17]]


def test_hash_rejects_unknown_kind():
    with pytest.raises(ValueError):
        HashFamily("fnv")
