"""Leapfrog join over sorted-array tries.

The engine binds the attributes of a global order one level at a time. At
each level the participating tries (those whose next unbound attribute is the
level's attribute) run a rotating intersection: everyone seeks to the current
maximum until all agree. Descent and backtracking are driven by an explicit
stack, not recursion, and the hot loop is flattened with every per-level
table precomputed; each extension costs a couple of list indexes plus at
most one bisect per lagging cursor.

Tries must be built on their atom's attributes sorted by the global order;
`ordered_attrs` computes that permutation.
"""

from __future__ import annotations

import time
from bisect import bisect_left
from dataclasses import dataclass, field

_BATCH_MASK = 1023  # clock sampled every 1024 extension calls


@dataclass
class LevelStats:
    """Per-level counters for one join run.

    bindings[i] counts accepted values at level i, i.e. the number of partial
    bindings of length i+1. ext_calls[i] counts partial bindings extended at
    level i (one per open, however many values the extension then yields), so
    ext_calls[i]/seconds[i] is an extensions-per-second rate and never an
    advance rate. seconds[i] accumulates wall time from batched clock samples,
    so per-level times are approximate while their sum tracks the true wall
    time.
    """

    attrs: tuple[str, ...]
    bindings: list[int] = field(default_factory=list)
    ext_calls: list[int] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    wall_seconds: float = 0.0

    def __post_init__(self):
        n = len(self.attrs)
        if not self.bindings:
            self.bindings = [0] * n
        if not self.ext_calls:
            self.ext_calls = [0] * n
        if not self.seconds:
            self.seconds = [0.0] * n

    @property
    def total_bindings(self) -> int:
        return sum(self.bindings)

    def merge(self, other: "LevelStats") -> None:
        if other.attrs != self.attrs:
            raise ValueError("cannot merge stats over different orders")
        for i in range(len(self.attrs)):
            self.bindings[i] += other.bindings[i]
            self.ext_calls[i] += other.ext_calls[i]
            self.seconds[i] += other.seconds[i]
        self.wall_seconds += other.wall_seconds

    def as_dict(self) -> dict:
        return {
            "attrs": list(self.attrs),
            "bindings": list(self.bindings),
            "ext_calls": list(self.ext_calls),
            "seconds": list(self.seconds),
            "wall_seconds": self.wall_seconds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LevelStats":
        return cls(
            tuple(d["attrs"]),
            list(d["bindings"]),
            list(d["ext_calls"]),
            list(d["seconds"]),
            d["wall_seconds"],
        )


def ordered_attrs(attrs, ord_attrs) -> tuple[str, ...]:
    """An atom's attributes sorted by their position in the global order."""
    pos = {a: i for i, a in enumerate(ord_attrs)}
    missing = [a for a in attrs if a not in pos]
    if missing:
        raise ValueError(f"attributes {missing} not in order {ord_attrs}")
    return tuple(sorted(attrs, key=pos.__getitem__))


def lf_join(
    tries,
    ord_attrs,
    *,
    materialize: bool = False,
    emit=None,
    stats: LevelStats | None = None,
    first_value: int | None = None,
):
    """Join the given tries along ``ord_attrs``.

    Returns (count, results) where results is a list of tuples in global
    order when ``materialize`` is set, else None. ``emit`` streams each
    result tuple instead of (or in addition to) collecting. ``first_value``
    pins the first attribute to a single value, turning the run into the
    count of bindings extending that value.
    """
    ord_attrs = tuple(ord_attrs)
    n = len(ord_attrs)
    tries = list(tries)
    if not tries:
        raise ValueError("no tries to join")
    level_of = {a: i for i, a in enumerate(ord_attrs)}

    # Flat per-(trie, depth) position table; slot = trie offset + depth.
    tvals, tcb, tce = [], [], []
    offsets = []
    nslots = 0
    for t in tries:
        expect = ordered_attrs(t.order, ord_attrs)
        if t.order != expect:
            raise ValueError(
                f"trie order {t.order} out of line with global order {ord_attrs}"
            )
        lists = t.level_lists()
        tvals.append([lv[0] for lv in lists])
        tcb.append([lv[1] for lv in lists])
        tce.append([lv[2] for lv in lists])
        offsets.append(nslots)
        nslots += t.arity
    tpos = [0] * nslots

    # Per-level participant tables, all precomputed.
    p_k = [0] * n          # participant count
    p_vals = [None] * n    # value-list refs per participant
    p_cb = [None] * n      # parent child_begin list ref, None at local root
    p_ce = [None] * n
    p_ppi = [None] * n     # flat slot of the parent position
    p_pub = [None] * n     # (participant idx, flat slot) to publish on match
    for ti, t in enumerate(tries):
        for ld, a in enumerate(t.order):
            i = level_of[a]
            if p_vals[i] is None:
                p_vals[i], p_cb[i], p_ce[i], p_ppi[i], p_pub[i] = [], [], [], [], []
            j = p_k[i]
            p_k[i] = j + 1
            p_vals[i].append(tvals[ti][ld])
            if ld == 0:
                p_cb[i].append(None)
                p_ce[i].append(None)
                p_ppi[i].append(-1)
            else:
                p_cb[i].append(tcb[ti][ld - 1])
                p_ce[i].append(tce[ti][ld - 1])
                p_ppi[i].append(offsets[ti] + ld - 1)
            if ld < t.arity - 1:
                p_pub[i].append((j, offsets[ti] + ld))
    for i, a in enumerate(ord_attrs):
        if not p_k[i]:
            raise ValueError(f"attribute {a!r} appears in no trie")

    if stats is None:
        stats = LevelStats(ord_attrs)
    elif stats.attrs != ord_attrs:
        raise ValueError("stats built for a different order")
    ext_calls = stats.ext_calls
    bindings = stats.bindings
    seconds = stats.seconds

    # Mutable per-level cursor state.
    lvl_cur = [[0] * p_k[i] for i in range(n)]
    lvl_hi = [[0] * p_k[i] for i in range(n)]
    bound = [0] * n
    results = [] if materialize else None
    count = 0

    perf = time.perf_counter
    t_start = perf()
    t_last = t_start
    calls = 0
    last = n - 1
    bl = bisect_left

    i = 0
    opening = True
    while i >= 0:
        calls += 1
        if opening:
            ext_calls[i] += 1
        if not (calls & _BATCH_MASK):
            now = perf()
            seconds[i] += now - t_last
            t_last = now

        k = p_k[i]
        vv = p_vals[i]
        cc = lvl_cur[i]
        hh = lvl_hi[i]
        v_found = True
        if opening:
            cbs = p_cb[i]
            ces = p_ce[i]
            ppis = p_ppi[i]
            j = 0
            while j < k:
                cb = cbs[j]
                if cb is None:
                    lo = 0
                    hi = len(vv[j])
                else:
                    pp = tpos[ppis[j]]
                    lo = cb[pp]
                    hi = ces[j][pp]
                if lo >= hi:
                    v_found = False
                    break
                cc[j] = lo
                hh[j] = hi
                j += 1
            if v_found:
                if i == 0 and first_value is not None:
                    # Pin the first level to one value: every cursor must hit it.
                    x = first_value
                    for j in range(k):
                        arr = vv[j]
                        p = cc[j]
                        if arr[p] < x:
                            p = bl(arr, x, p + 1, hh[j])
                            if p >= hh[j]:
                                v_found = False
                                break
                            cc[j] = p
                        if arr[p] != x:
                            v_found = False
                            break
                else:
                    x = vv[0][cc[0]]
        else:
            if i == 0 and first_value is not None:
                v_found = False
            else:
                c0 = cc[0] + 1
                if c0 >= hh[0]:
                    v_found = False
                else:
                    cc[0] = c0
                    x = vv[0][c0]

        if v_found and k > 1 and not (opening and i == 0 and first_value is not None):
            # Rotating intersection: chase the running maximum until k agree.
            agree = 1
            j = 1
            while agree < k:
                jj = j % k
                arr = vv[jj]
                p = cc[jj]
                if arr[p] < x:
                    p = bl(arr, x, p + 1, hh[jj])
                    if p >= hh[jj]:
                        v_found = False
                        break
                    cc[jj] = p
                y = arr[p]
                if y == x:
                    agree += 1
                else:
                    x = y
                    agree = 1
                j += 1

        if not v_found:
            i -= 1
            opening = False
            continue

        for j, slot in p_pub[i]:
            tpos[slot] = cc[j]
        bound[i] = x
        bindings[i] += 1
        if i == last:
            count += 1
            if materialize:
                results.append(tuple(bound))
            if emit is not None:
                emit(tuple(bound))
            opening = False
        else:
            i += 1
            opening = True

    now = perf()
    seconds[last] += now - t_last
    stats.wall_seconds += now - t_start
    return count, results


def lf_join_fixed(tries, ord_attrs, value, *, stats=None, materialize=False):
    """Count (or collect) the bindings whose first attribute equals value."""
    return lf_join(
        tries,
        ord_attrs,
        materialize=materialize,
        stats=stats,
        first_value=value,
    )
