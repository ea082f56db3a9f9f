"""Edit distance kernels and block-partition witnesses.

``edit_distance`` runs Myers' bit-vector algorithm in 64-bit blocks, which
costs ``O(n * ceil(m / 64))`` word operations with ``m`` the shorter input.
``edit_distance_banded`` answers the cheaper question "is the distance at
most ``band``, and if so what is it" by doubling a diagonal band.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np
from numba import njit

from .bits import Partition, as_array

__all__ = [
    "edit_distance",
    "edit_distance_banded",
    "edit_distance_table",
    "partition_edit_witness",
    "min_partition_mismatch_bruteforce",
    "WITNESS_MAX_CELLS",
    "BRUTEFORCE_MAX_LEN",
    "BRUTEFORCE_MAX_PARTS",
]

# Full suffix table for the witness: (|u|+1)(|v|+1) int32 cells.
WITNESS_MAX_CELLS = 25_000_000
BRUTEFORCE_MAX_LEN = 16
BRUTEFORCE_MAX_PARTS = 6


@njit(cache=True, nogil=True)
def _myers(pattern, text):
    m = pattern.shape[0]
    n = text.shape[0]
    if m == 0:
        return n
    if n == 0:
        return m
    nb = (m + 63) // 64
    one = np.uint64(1)
    peq = np.zeros((2, nb), dtype=np.uint64)
    for i in range(m):
        peq[pattern[i], i // 64] |= one << np.uint64(i % 64)
    pv = np.full(nb, ~np.uint64(0), dtype=np.uint64)
    mv = np.zeros(nb, dtype=np.uint64)
    high = one << np.uint64(63)
    last = one << np.uint64((m - 1) % 64)
    score = m
    for j in range(n):
        c = text[j]
        hin = 1
        for k in range(nb):
            eq = peq[c, k]
            p = pv[k]
            q = mv[k]
            xv = eq | q
            if hin < 0:
                eq |= one
            xh = (((eq & p) + p) ^ p) | eq
            ph = q | ~(xh | p)
            mh = p & xh
            hb = last if k == nb - 1 else high
            hout = 0
            if ph & hb:
                hout = 1
            elif mh & hb:
                hout = -1
            ph = ph << one
            mh = mh << one
            if hin < 0:
                mh |= one
            elif hin > 0:
                ph |= one
            pv[k] = mh | ~(xv | ph)
            mv[k] = ph & xv
            hin = hout
        score += hin
    return score


@njit(cache=True, nogil=True)
def _banded(a, b, k):
    """Edit distance if it is <= k, otherwise k + 1."""
    m = a.shape[0]
    n = b.shape[0]
    if abs(m - n) > k:
        return k + 1
    cap = k + 1
    width = 2 * k + 1
    prev = np.full(width, cap, dtype=np.int64)
    cur = np.full(width, cap, dtype=np.int64)
    for j in range(min(n, k) + 1):
        prev[j + k] = j
    for i in range(1, m + 1):
        lo = max(0, i - k)
        hi = min(n, i + k)
        for t in range(width):
            cur[t] = cap
        row_min = cap
        for j in range(lo, hi + 1):
            off = j - i + k
            if j == 0:
                d = i
            else:
                d = prev[off] + (1 if a[i - 1] != b[j - 1] else 0)
                if off + 1 < width and prev[off + 1] + 1 < d:
                    d = prev[off + 1] + 1
                if off >= 1 and cur[off - 1] + 1 < d:
                    d = cur[off - 1] + 1
            if d > cap:
                d = cap
            cur[off] = d
            if d < row_min:
                row_min = d
        if row_min >= cap:
            return cap
        prev, cur = cur, prev
    return min(prev[n - m + k], cap)


@njit(cache=True, nogil=True)
def _suffix_table(u, v):
    mu = u.shape[0]
    nv = v.shape[0]
    d = np.empty((mu + 1, nv + 1), dtype=np.int32)
    for j in range(nv + 1):
        d[mu, j] = nv - j
    for i in range(mu - 1, -1, -1):
        d[i, nv] = mu - i
        for j in range(nv - 1, -1, -1):
            best = d[i + 1, j + 1] + (1 if u[i] != v[j] else 0)
            if d[i + 1, j] + 1 < best:
                best = d[i + 1, j] + 1
            if d[i, j + 1] + 1 < best:
                best = d[i, j + 1] + 1
            d[i, j] = best
    return d


def edit_distance(a, b) -> int:
    """Levenshtein distance (unit-cost insertions, deletions, substitutions)."""
    x, y = as_array(a), as_array(b)
    if x.size > y.size:
        x, y = y, x
    return int(_myers(x, y))


def edit_distance_banded(a, b, band: int, *, switch: bool = True) -> int | None:
    """Exact edit distance when it is at most ``band``; ``None`` otherwise.

    The diagonal band starts at the length difference and doubles until the
    distance is certified or the band reaches ``band``.  Once a row of the
    band costs more than a column of the bit-vector kernel, the search
    switches to the latter (``switch=False`` keeps the banded DP throughout).
    """
    if band < 1:
        raise ValueError("band must be >= 1")
    x, y = as_array(a), as_array(b)
    diff = abs(x.size - y.size)
    if diff > band:
        return None
    words = (min(x.size, y.size) + 63) // 64
    k = max(diff, 32)
    while True:
        k = min(k, band)
        if switch and 2 * k + 1 > 2 * words:
            d = edit_distance(x, y)
            return d if d <= band else None
        d = int(_banded(x, y, k))
        if d <= k:
            return d
        if k == band:
            return None
        k *= 2


def edit_distance_table(u, v) -> np.ndarray:
    """Suffix table ``D[i, j] = d_E(u[i:], v[j:])``."""
    x, y = as_array(u), as_array(v)
    if (x.size + 1) * (y.size + 1) > WITNESS_MAX_CELLS:
        raise ValueError(
            f"witness table would need {(x.size + 1) * (y.size + 1)} cells "
            f"(limit {WITNESS_MAX_CELLS})"
        )
    return _suffix_table(x, y)


def partition_edit_witness(u, v, pv: Partition) -> tuple[Partition, int]:
    """Partition ``u`` block-by-block against ``pv`` so the mismatch count is <= d_E(u, v).

    Walks the blocks of ``v`` left to right.  When the block is a prefix of
    what is left of ``u`` it is matched verbatim (stripping a common prefix
    leaves the distance unchanged); otherwise the matching piece of ``u`` is
    read off an optimal alignment of the remainders, which spends at least one
    edit inside the block.
    """
    x, y = as_array(u), as_array(v)
    if pv.length != y.size:
        raise ValueError(f"partition covers {pv.length} bits, v has {y.size}")
    table = edit_distance_table(x, y)
    c = pv.boundaries
    b = pv.size
    cuts = [0]
    pos = 0
    for k in range(b - 1):
        j, target = c[k], c[k + 1]
        width = target - j
        if pos + width <= x.size and np.array_equal(x[pos:pos + width], y[j:target]):
            pos += width
        else:
            i = pos
            while j < target:
                here = table[i, j]
                if i < x.size and table[i + 1, j + 1] + (x[i] != y[j]) == here:
                    i += 1
                    j += 1
                elif table[i, j + 1] + 1 == here:
                    j += 1
                else:
                    i += 1
            pos = i
        cuts.append(pos)
    cuts.append(x.size)
    pu = Partition(tuple(cuts))
    mismatches = sum(
        1
        for k in range(b)
        if not np.array_equal(x[pu.boundaries[k]:pu.boundaries[k + 1]], y[c[k]:c[k + 1]])
    )
    return pu, mismatches


@lru_cache(maxsize=None)
def _all_cuts(length: int, parts: int) -> np.ndarray:
    inner = list(combinations_with_replacement(range(length + 1), parts - 1))
    arr = np.zeros((len(inner), parts + 1), dtype=np.int64)
    if parts > 1:
        arr[:, 1:-1] = np.asarray(inner, dtype=np.int64).reshape(len(inner), parts - 1)
    arr[:, -1] = length
    return arr


def min_partition_mismatch_bruteforce(u, v, pv: Partition) -> int:
    """Minimum over every partition of ``u`` into ``pv.size`` parts of the block mismatch count.

    Exhaustive enumeration; limited to ``|u| <= 16`` and at most 6 parts.
    """
    x, y = as_array(u), as_array(v)
    b = pv.size
    if x.size > BRUTEFORCE_MAX_LEN or b > BRUTEFORCE_MAX_PARTS:
        raise ValueError(
            f"brute force budget exceeded: |u|={x.size} (max {BRUTEFORCE_MAX_LEN}), "
            f"b={b} (max {BRUTEFORCE_MAX_PARTS})"
        )
    if pv.length != y.size:
        raise ValueError(f"partition covers {pv.length} bits, v has {y.size}")
    n = x.size
    # differs[k, s, e] = 1 if u[s:e] != V_k (entries with e < s are never read)
    differs = np.ones((b, n + 1, n + 1), dtype=np.int64)
    ux = x.tobytes()
    for k in range(b):
        block = y[pv.boundaries[k]:pv.boundaries[k + 1]].tobytes()
        for s in range(n + 1):
            for e in range(s, n + 1):
                differs[k, s, e] = ux[s:e] != block
    cuts = _all_cuts(n, b)
    totals = np.zeros(cuts.shape[0], dtype=np.int64)
    for k in range(b):
        totals += differs[k, cuts[:, k], cuts[:, k + 1]]
    return int(totals.min())
