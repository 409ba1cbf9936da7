"""Hypercube partitioning of tuples for one-round shuffles.

Each query attribute A gets a share p_A; the grid of all coordinate vectors
(one component per attribute, component i ranging over [0, p_i)) forms
P = prod(p) hypercubes. A tuple of an atom hashes to a signature over the
atom's own attributes; it belongs to every hypercube whose coordinate agrees
with that signature, the absent attributes acting as wildcards. Relations
are therefore duplicated dup(R,p) = prod of shares of the absent attributes,
while each hypercube sees the fraction frac(R,p) = 1/prod of shares of the
present ones.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import prod

import numpy as np

_M64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB


@dataclass(frozen=True)
class ShareVector:
    """Shares aligned with a fixed attribute tuple (the query's)."""

    attrs: tuple[str, ...]
    shares: tuple[int, ...]

    def __post_init__(self):
        if len(self.attrs) != len(self.shares):
            raise ValueError("attrs and shares differ in length")
        if any(s < 1 for s in self.shares):
            raise ValueError(f"shares must be >= 1: {self.shares}")

    @property
    def P(self) -> int:
        return prod(self.shares)

    def share_of(self, attr: str) -> int:
        return self.shares[self.attrs.index(attr)]

    def indices_of(self, atom_attrs) -> tuple[int, ...]:
        """Positions of an atom's attributes, in canonical (query) order."""
        idx = sorted(self.attrs.index(a) for a in atom_attrs)
        return tuple(idx)


def dup(share: ShareVector, atom_attrs) -> int:
    """Duplication factor: copies of each tuple across the grid."""
    present = set(atom_attrs)
    return prod(s for a, s in zip(share.attrs, share.shares) if a not in present)


def frac(share: ShareVector, atom_attrs) -> Fraction:
    """Fraction of a relation landing in any single hypercube."""
    present = set(atom_attrs)
    return Fraction(
        1, prod(s for a, s in zip(share.attrs, share.shares) if a in present)
    )


class HashFamily:
    """Per-attribute hash h_i: value -> [0, p_i).

    kind "mod" is the bare x mod p_i (used by the worked examples); kind
    "msw" seeds a splitmix-style 64-bit mix per attribute before reducing,
    so correlated columns spread independently. Both are pure functions of
    (seed, attribute index, value), identical across processes.
    """

    def __init__(self, kind: str = "msw", seed: int = 0):
        if kind not in ("mod", "msw"):
            raise ValueError(f"unknown hash family {kind!r}")
        self.kind = kind
        self.seed = seed

    def _attr_seed(self, attr_idx: int) -> int:
        return _mix64((self.seed + 1) * _SPLITMIX_GAMMA + attr_idx)

    def value(self, attr_idx: int, x: int, p: int) -> int:
        if p == 1:
            return 0
        if self.kind == "mod":
            return int(x) % p
        return _finalize(int(x) + self._attr_seed(attr_idx)) % p

    def column(self, attr_idx: int, xs: np.ndarray, p: int) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.int64)
        if p == 1:
            return np.zeros(len(xs), dtype=np.int64)
        if self.kind == "mod":
            return np.mod(xs, p).astype(np.int64)
        u = xs.view(np.uint64) if xs.dtype == np.int64 else xs.astype(np.uint64)
        z = u + np.uint64(self._attr_seed(attr_idx))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_A)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_B)
        z = z ^ (z >> np.uint64(31))
        return (z % np.uint64(p)).astype(np.int64)


def _finalize(z: int) -> int:
    z &= _M64
    z = ((z ^ (z >> 30)) * _MIX_A) & _M64
    z = ((z ^ (z >> 27)) * _MIX_B) & _M64
    return z ^ (z >> 31)


def _mix64(x: int) -> int:
    return _finalize(x + _SPLITMIX_GAMMA)


def signature_of(values, attr_indices, share: ShareVector, hashf: HashFamily):
    """Signature of one tuple. ``values`` are the tuple components aligned
    with ``attr_indices`` (positions into share.attrs, ascending)."""
    return tuple(
        hashf.value(ai, v, share.shares[ai]) for ai, v in zip(attr_indices, values)
    )


def enumerate_coordinates(share: ShareVector) -> list[tuple[int, ...]]:
    """All grid coordinates in lexicographic order."""
    return list(itertools.product(*(range(s) for s in share.shares)))


def assign_coordinates(share: ShareVector, n_workers: int) -> list[list[tuple]]:
    """Round-robin the lexicographic grid over workers; loads differ by at
    most one coordinate."""
    out = [[] for _ in range(n_workers)]
    for c, coord in enumerate(enumerate_coordinates(share)):
        out[c % n_workers].append(coord)
    return out


def coordinates_matching(share: ShareVector, attr_indices, signature):
    """Expand a signature's wildcard pattern into grid coordinates."""
    fixed = dict(zip(attr_indices, signature))
    axes = [
        [fixed[i]] if i in fixed else range(s) for i, s in enumerate(share.shares)
    ]
    return [tuple(c) for c in itertools.product(*axes)]


def coordinate_restriction(coord, attr_indices) -> tuple[int, ...]:
    """A coordinate restricted to an atom's attributes = the one signature
    whose blocks the cube pulls for that atom."""
    return tuple(coord[i] for i in attr_indices)


def group_blocks(rows: np.ndarray, attr_indices, share: ShareVector, hashf: HashFamily):
    """Split an atom's tuple matrix into blocks keyed by signature.

    ``rows`` columns must be aligned with ``attr_indices`` (the atom's
    attributes as positions into share.attrs, ascending). Returns a dict
    signature -> row matrix; the blocks partition the input rows.
    """
    rows = np.asarray(rows, dtype=np.int64)
    n = rows.shape[0]
    if n == 0:
        return {}
    codes = np.zeros(n, dtype=np.int64)
    for col, ai in enumerate(attr_indices):
        codes = codes * share.shares[ai] + hashf.column(ai, rows[:, col], share.shares[ai])
    order = np.argsort(codes, kind="stable")
    sorted_codes = codes[order]
    boundaries = np.flatnonzero(np.diff(sorted_codes)) + 1
    groups = np.split(order, boundaries)
    radices = [share.shares[ai] for ai in attr_indices]
    out = {}
    for g in groups:
        sig = _decode_mixed_radix(int(codes[g[0]]), radices)
        out[sig] = rows[g]
    return out


def _decode_mixed_radix(code: int, radices) -> tuple[int, ...]:
    digits = []
    for r in reversed(radices):
        digits.append(code % r)
        code //= r
    return tuple(reversed(digits))
