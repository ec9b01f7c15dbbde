"""Compiled inner loops of the estimator.

Indices are 0-based. A change at ``c`` means a new segment starts at
observation ``c``; candidate sets are inclusive ranges ``[lo[k], hi[k]]``
with sentinels ``{0}`` before the first segment and ``{n}`` after the last.
Intervals are addressed through two CSR tables: by end (latest start first)
and by start (earliest end first).
"""

import numpy as np
from numba import njit

INF = np.inf


@njit(cache=True)
def right_limits(n, lo, hi, starts, end_ptr, end_ids):
    out = np.empty(n, dtype=np.int64)
    count = 0
    s = 0
    blo, bhi = -INF, INF
    for r in range(n):
        for p in range(end_ptr[r], end_ptr[r + 1]):
            iid = end_ids[p]
            if starts[iid] < s:
                break
            if lo[iid] > blo:
                blo = lo[iid]
            if hi[iid] < bhi:
                bhi = hi[iid]
        if blo > bhi:
            out[count] = r
            count += 1
            s = r
            blo, bhi = -INF, INF
    return out[:count]


@njit(cache=True)
def left_limits(n, k_hat, lo, hi, ends, start_ptr, start_ids):
    out = np.empty(k_hat, dtype=np.int64)
    e = n - 1
    for k in range(k_hat - 1, -1, -1):
        blo, bhi = -INF, INF
        found = 1
        for r in range(e, 0, -1):
            for p in range(start_ptr[r], start_ptr[r + 1]):
                iid = start_ids[p]
                if ends[iid] > e:
                    break
                if lo[iid] > blo:
                    blo = lo[iid]
                if hi[iid] < bhi:
                    bhi = hi[iid]
            if blo > bhi:
                found = r + 1
                break
        out[k] = found
        e = found - 1
    return out


@njit(cache=True)
def segment_bounds(a, b, lo, hi, ends, start_ptr, start_ids):
    """Intersected bounds over ``[a, b]``."""
    blo, bhi = -INF, INF
    for r in range(b, a - 1, -1):
        for p in range(start_ptr[r], start_ptr[r + 1]):
            iid = start_ids[p]
            if ends[iid] > b:
                break
            if lo[iid] > blo:
                blo = lo[iid]
            if hi[iid] < bhi:
                bhi = hi[iid]
    return blo, bhi


@njit(cache=True)
def segment_mean_rss(a, b, y, center, c1, c2, run_start):
    length = b - a + 1
    if run_start[b] <= a:
        return y[a], 0.0
    s1 = c1[b + 1] - c1[a]
    s2 = c2[b + 1] - c2[a]
    mean_c = s1 / length
    rss = s2 - s1 * mean_c
    if rss < 0.0:
        rss = 0.0
    return mean_c + center, rss


@njit(cache=True)
def segment_cost(a, b, blo, bhi, y, center, c1, c2, run_start, var_floor):
    """Profile gaussian cost of ``[a, b]`` with the mean clipped into ``[blo, bhi]``."""
    length = b - a + 1
    mean, rss = segment_mean_rss(a, b, y, center, c1, c2, run_start)
    mu = mean
    if mu < blo:
        mu = blo
    elif mu > bhi:
        mu = bhi
    rss += length * (mean - mu) ** 2
    v = rss / length
    if v < var_floor:
        v = var_floor
    return length * np.log(v)


@njit(cache=True)
def constrained_dp(n, cand_lo, cand_hi, lo, hi, starts, ends, end_ptr, end_ids,
                   start_ptr, start_ids, y, center, c1, c2, run_start, var_floor):
    """Minimal total cost over change sets with the k-th change in its range.

    Returns the chosen changes (length ``K``, sentinels dropped) and the cost.
    Ties go to the smallest predecessor index.
    """
    stages = len(cand_lo)
    offset = np.zeros(stages + 1, dtype=np.int64)
    for k in range(stages):
        offset[k + 1] = offset[k] + cand_hi[k] - cand_lo[k] + 1
    best = np.full(offset[stages], INF)
    back = np.full(offset[stages], -1, dtype=np.int64)
    best[0] = 0.0
    for k in range(stages - 1):
        a_lo, a_hi = cand_lo[k], cand_hi[k]
        e_min = cand_lo[k + 1] - 1
        e_max = cand_hi[k + 1] - 1
        width = a_hi - a_lo + 1
        base_lo = np.full(width, -INF)
        base_hi = np.full(width, INF)
        blo, bhi = -INF, INF
        top = min(a_hi, e_min)
        for r in range(e_min, a_lo - 1, -1):
            for p in range(start_ptr[r], start_ptr[r + 1]):
                iid = start_ids[p]
                if ends[iid] > e_min:
                    break
                if lo[iid] > blo:
                    blo = lo[iid]
                if hi[iid] < bhi:
                    bhi = hi[iid]
            if r <= top:
                base_lo[r - a_lo] = blo
                base_hi[r - a_lo] = bhi
        for c in range(a_lo, a_hi + 1):
            prev = best[offset[k] + c - a_lo]
            if prev == INF:
                continue
            if c <= e_min:
                blo = base_lo[c - a_lo]
                bhi = base_hi[c - a_lo]
                e = e_min
            else:
                blo, bhi = -INF, INF
                e = c - 1
            while True:
                if blo > bhi:
                    break
                if e >= c and e >= e_min:
                    total = prev + segment_cost(c, e, blo, bhi, y, center, c1, c2, run_start, var_floor)
                    slot = offset[k + 1] + e + 1 - cand_lo[k + 1]
                    if total < best[slot]:
                        best[slot] = total
                        back[slot] = c
                e += 1
                if e > e_max:
                    break
                for p in range(end_ptr[e], end_ptr[e + 1]):
                    iid = end_ids[p]
                    if starts[iid] < c:
                        break
                    if lo[iid] > blo:
                        blo = lo[iid]
                    if hi[iid] < bhi:
                        bhi = hi[iid]
    changes = np.empty(stages - 2, dtype=np.int64)
    c = n
    for k in range(stages - 1, 0, -1):
        c = back[offset[k] + c - cand_lo[k]]
        if k > 1:
            changes[k - 2] = c
    return changes, best[offset[stages - 1]]


@njit(cache=True)
def envelope(n, cand_lo, cand_hi, lo, hi, starts, ends, end_ptr, end_ids, start_ptr, start_ids):
    """Pointwise hull of all values taken by feasible minimal solutions.

    For segment ``j`` and a point ``x`` it may contain, the loosest admissible
    segment runs from ``min(R_j, x)`` to ``max(L_{j+1} - 1, x)``; every other
    admissible segment through ``x`` contains it.
    """
    band_lo = np.full(n, INF)
    band_hi = np.full(n, -INF)
    segs = len(cand_lo) - 1
    for j in range(segs):
        l_j, r_j = cand_lo[j], cand_hi[j]
        l_next, r_next = cand_lo[j + 1], cand_hi[j + 1]
        e = l_next - 1
        blo, bhi = -INF, INF
        for r in range(e, l_j - 1, -1):
            for p in range(start_ptr[r], start_ptr[r + 1]):
                iid = start_ids[p]
                if ends[iid] > e:
                    break
                if lo[iid] > blo:
                    blo = lo[iid]
                if hi[iid] < bhi:
                    bhi = hi[iid]
            if blo > bhi:
                break
            if r < r_j:
                if blo < band_lo[r]:
                    band_lo[r] = blo
                if bhi > band_hi[r]:
                    band_hi[r] = bhi
            elif r == r_j:
                for x in range(r_j, e + 1):
                    if blo < band_lo[x]:
                        band_lo[x] = blo
                    if bhi > band_hi[x]:
                        band_hi[x] = bhi
        for x in range(l_next, r_j):
            band_lo[x] = -INF
            band_hi[x] = INF
        blo, bhi = -INF, INF
        for e2 in range(r_j, r_next):
            for p in range(end_ptr[e2], end_ptr[e2 + 1]):
                iid = end_ids[p]
                if starts[iid] < r_j:
                    break
                if lo[iid] > blo:
                    blo = lo[iid]
                if hi[iid] < bhi:
                    bhi = hi[iid]
            if blo > bhi:
                break
            if e2 >= l_next:
                if blo < band_lo[e2]:
                    band_lo[e2] = blo
                if bhi > band_hi[e2]:
                    band_hi[e2] = bhi
    return band_lo, band_hi
