"""Sorted-array tries over integer tuples.

A trie stores an arity-k relation as k flat levels. Level d holds the distinct
(d+1)-prefixes' last components in lexicographic order; nodes point at their
children through half-open ranges into level d+1. Within any parent range the
values are strictly increasing, which is what the seek-based cursors rely on.
"""

from __future__ import annotations

import struct
from bisect import bisect_left
from dataclasses import dataclass, field

import numpy as np

from .errors import CursorProtocolError


@dataclass(frozen=True, eq=False)
class TrieIndex:
    order: tuple[str, ...]                 # attribute name per level
    levels: tuple[np.ndarray, ...] = field(repr=False)          # values per level
    child_begin: tuple[np.ndarray, ...] = field(repr=False)     # ranges into level d+1
    child_end: tuple[np.ndarray, ...] = field(repr=False)
    n_tuples: int = 0
    # Lazily materialized list views of the level arrays; python-level join
    # loops index these far faster than numpy scalars.
    _list_levels: list = field(default=None, repr=False)

    @property
    def arity(self) -> int:
        return len(self.order)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrieIndex):
            return NotImplemented
        return (
            self.order == other.order
            and self.n_tuples == other.n_tuples
            and all(np.array_equal(a, b) for a, b in zip(self.levels, other.levels))
            and all(
                np.array_equal(a, b)
                for a, b in zip(self.child_begin, other.child_begin)
            )
            and all(
                np.array_equal(a, b) for a, b in zip(self.child_end, other.child_end)
            )
        )

    def level_lists(self):
        """(values, child_begin, child_end) per level as python lists."""
        if self._list_levels is None:
            lists = []
            for d in range(self.arity):
                vals = self.levels[d].tolist()
                if d < self.arity - 1:
                    lists.append(
                        (vals, self.child_begin[d].tolist(), self.child_end[d].tolist())
                    )
                else:
                    lists.append((vals, None, None))
            object.__setattr__(self, "_list_levels", lists)
        return self._list_levels

    def to_tuples(self) -> np.ndarray:
        """Expand back to the lexicographically sorted tuple matrix."""
        k = self.arity
        if self.n_tuples == 0:
            return np.empty((0, k), dtype=np.int64)
        leaf_count = np.ones(len(self.levels[k - 1]), dtype=np.int64)
        cols = [self.levels[k - 1]]
        for d in range(k - 2, -1, -1):
            counts = np.add.reduceat(leaf_count, self.child_begin[d])
            cols.append(np.repeat(self.levels[d], counts))
            leaf_count = counts
        cols.reverse()
        return np.column_stack(cols)

    def to_bytes(self) -> bytes:
        """Wire format: little-endian u64 header (arity, n_tuples), then per
        level a length-prefixed i64 value array, then per non-leaf level the
        length-prefixed begin and end range arrays."""
        out = [struct.pack("<QQ", self.arity, self.n_tuples)]
        for d in range(self.arity):
            out.append(_pack_array(self.levels[d]))
        for d in range(self.arity - 1):
            out.append(_pack_array(self.child_begin[d]))
            out.append(_pack_array(self.child_end[d]))
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes, order) -> "TrieIndex":
        arity, n_tuples = struct.unpack_from("<QQ", data, 0)
        if arity != len(order):
            raise ValueError(f"payload arity {arity} != order {order}")
        off = 16
        levels = []
        for _ in range(arity):
            arr, off = _unpack_array(data, off)
            levels.append(arr)
        begins, ends = [], []
        for _ in range(arity - 1):
            b, off = _unpack_array(data, off)
            e, off = _unpack_array(data, off)
            begins.append(b)
            ends.append(e)
        if off != len(data):
            raise ValueError("trailing bytes in trie payload")
        return cls(tuple(order), tuple(levels), tuple(begins), tuple(ends), n_tuples)

    def cursor(self) -> "TrieCursor":
        return TrieCursor(self)


def _pack_array(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype="<i8")
    return struct.pack("<Q", arr.shape[0]) + arr.tobytes()


def _unpack_array(data: bytes, off: int):
    (n,) = struct.unpack_from("<Q", data, off)
    off += 8
    arr = np.frombuffer(data, dtype="<i8", count=n, offset=off).astype(np.int64)
    return arr, off + 8 * n


def build_trie_from_array(rows: np.ndarray, order) -> TrieIndex:
    """Build from an (n, k) matrix whose columns already follow ``order``.
    Rows need not be sorted or unique."""
    order = tuple(order)
    k = len(order)
    rows = np.asarray(rows, dtype=np.int64).reshape(-1, k)
    if rows.shape[0] == 0:
        empty = np.empty(0, dtype=np.int64)
        return TrieIndex(order, (empty,) * k, (empty,) * (k - 1), (empty,) * (k - 1), 0)
    rows = np.unique(rows, axis=0)
    n = rows.shape[0]

    # changed[d][i]: row i starts a new node at level d (prefix of length d+1
    # differs from row i-1). Nodes at level d are first occurrences.
    levels, begins, ends = [], [], []
    changed = np.empty(n, dtype=bool)
    changed[0] = True
    prev_changed = None
    for d in range(k):
        if d == 0:
            changed[1:] = rows[1:, 0] != rows[:-1, 0]
        else:
            changed[1:] = prev_changed[1:] | (rows[1:, d] != rows[:-1, d])
            changed[0] = True
        this_changed = changed.copy()
        levels.append(rows[this_changed, d])
        node_of_row = np.cumsum(this_changed) - 1
        if d > 0:
            # Parent ranges: children of level d-1 nodes are contiguous runs.
            starts = np.flatnonzero(prev_changed)
            begins.append(node_of_row[starts])
            ends.append(
                np.append(node_of_row[starts][1:], node_of_row[-1] + 1)
            )
        prev_changed = this_changed
    return TrieIndex(
        order,
        tuple(levels),
        tuple(begins),
        tuple(ends),
        n,
    )


def build_trie(relation, order=None) -> TrieIndex:
    """Build a trie for a relation. ``order`` is a permutation of the schema
    names (defaults to the schema itself); columns are reordered to match."""
    if order is None:
        order = relation.schema
    order = tuple(order)
    if sorted(order) != sorted(relation.schema):
        raise ValueError(f"order {order} is not a permutation of {relation.schema}")
    cols = [relation.schema.index(a) for a in order]
    return build_trie_from_array(relation.tuples[:, cols], order)


def merge_block_tries(tries) -> TrieIndex:
    """Union of same-order tries (e.g. the per-source blocks of one relation
    pulled for one hypercube)."""
    tries = list(tries)
    if not tries:
        raise ValueError("nothing to merge")
    order = tries[0].order
    if any(t.order != order for t in tries):
        raise ValueError("tries disagree on attribute order")
    parts = [t.to_tuples() for t in tries if t.n_tuples]
    if not parts:
        return build_trie_from_array(np.empty((0, len(order))), order)
    return build_trie_from_array(np.concatenate(parts, axis=0), order)


class TrieCursor:
    """Stack-shaped view over one trie.

    ``open()`` descends into the first child of the current node, ``up()``
    ascends, ``next()``/``seek(lo)`` move right within the sibling range and
    return False once exhausted. ``seek`` finds the least value >= lo and
    never moves backward. Misuse raises CursorProtocolError instead of
    corrupting state.
    """

    def __init__(self, trie: TrieIndex):
        self.trie = trie
        self._stack: list[list[int]] = []  # [lo, hi, pos] per open level

    @property
    def depth(self) -> int:
        return len(self._stack)

    def at_end(self) -> bool:
        if not self._stack:
            raise CursorProtocolError("at_end before open")
        lo, hi, pos = self._stack[-1]
        return pos >= hi

    def key(self) -> int:
        if not self._stack:
            raise CursorProtocolError("key at root")
        lo, hi, pos = self._stack[-1]
        if pos >= hi:
            raise CursorProtocolError("key on exhausted level")
        return int(self.trie.levels[len(self._stack) - 1][pos])

    def open(self) -> bool:
        """Descend one level (to the first child). Returns False if the new
        level is empty (only possible on an empty trie)."""
        d = len(self._stack)
        if d >= self.trie.arity:
            raise CursorProtocolError("open past leaf level")
        if d == 0:
            lo, hi = 0, len(self.trie.levels[0])
        else:
            plo, phi, ppos = self._stack[-1]
            if ppos >= phi:
                raise CursorProtocolError("open on exhausted level")
            lo = int(self.trie.child_begin[d - 1][ppos])
            hi = int(self.trie.child_end[d - 1][ppos])
        self._stack.append([lo, hi, lo])
        return lo < hi

    def up(self) -> None:
        if not self._stack:
            raise CursorProtocolError("up at root")
        self._stack.pop()

    def next(self) -> bool:
        if not self._stack:
            raise CursorProtocolError("next at root")
        frame = self._stack[-1]
        if frame[2] >= frame[1]:
            raise CursorProtocolError("next on exhausted level")
        frame[2] += 1
        return frame[2] < frame[1]

    def seek(self, lo_value: int) -> bool:
        """Galloping search for the least key >= lo_value at this level."""
        if not self._stack:
            raise CursorProtocolError("seek at root")
        frame = self._stack[-1]
        _, hi, pos = frame
        if pos >= hi:
            raise CursorProtocolError("seek on exhausted level")
        vals = self.trie.levels[len(self._stack) - 1]
        if vals[pos] >= lo_value:
            return True
        step = 1
        low = pos
        while pos + step < hi and vals[pos + step] < lo_value:
            low = pos + step
            step <<= 1
        new_pos = bisect_left(vals, lo_value, low + 1, min(pos + step + 1, hi))
        frame[2] = new_pos
        return new_pos < hi

    def values(self) -> list[int]:
        """Remaining keys at the current level, from the cursor position on.
        Handy for projections in tests; does not move the cursor."""
        if not self._stack:
            raise CursorProtocolError("values at root")
        lo, hi, pos = self._stack[-1]
        return self.trie.levels[len(self._stack) - 1][pos:hi].tolist()
