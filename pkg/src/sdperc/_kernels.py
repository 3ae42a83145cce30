"""Hot loops, JIT-compiled when numba is available.

The same function bodies run un-jitted as a fallback, so behaviour is
identical either way; numba only buys the throughput needed for the
multi-million-edge regions and the per-site reach searches.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco


@njit(cache=True)
def find_root(parent, x):
    # path halving
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def union_pairs(parent, rank, a, b):
    for k in range(a.shape[0]):
        ra = find_root(parent, a[k])
        rb = find_root(parent, b[k])
        if ra == rb:
            continue
        if rank[ra] < rank[rb]:
            parent[ra] = rb
        elif rank[ra] > rank[rb]:
            parent[rb] = ra
        else:
            parent[rb] = ra
            rank[ra] += 1


@njit(cache=True)
def compress_all(parent):
    for i in range(parent.shape[0]):
        parent[i] = find_root(parent, i)


@njit(cache=True)
def count_reaching(open_bits, lo, hi, shape, sstr, eoff, estr,
                   sub_lo, sub_shape, sub_str, L):
    """Number of sites y in the sub-box connected (within B_y(L) intersected
    with the region) to a site at infinity-norm distance exactly L."""
    d = lo.shape[0]
    n = 1
    for j in range(d):
        n *= shape[j]
    nsub = 1
    for j in range(d):
        nsub *= sub_shape[j]

    visited = np.zeros(n, np.int64)
    queue = np.empty(n, np.int64)
    cy = np.empty(d, np.int64)
    cc = np.empty(d, np.int64)

    count = 0
    for sr in range(nsub):
        rem = sr
        y_idx = 0
        for j in range(d):
            q = rem // sub_str[j]
            rem -= q * sub_str[j]
            cy[j] = sub_lo[j] + q
            y_idx += (cy[j] - lo[j]) * sstr[j]

        stamp = sr + 1
        found = False
        head = 0
        tail = 0
        visited[y_idx] = stamp
        queue[tail] = y_idx
        tail += 1
        while head < tail and not found:
            i = queue[head]
            head += 1
            rem = i
            for j in range(d):
                q = rem // sstr[j]
                rem -= q * sstr[j]
                cc[j] = lo[j] + q
            for a in range(d):
                ca = cc[a]
                # forward neighbour (base is the current site)
                if ca < hi[a] and ca + 1 - cy[a] <= L:
                    er = eoff[a]
                    for j in range(d):
                        er += (cc[j] - lo[j]) * estr[a, j]
                    if open_bits[er]:
                        ni = i + sstr[a]
                        if visited[ni] != stamp:
                            visited[ni] = stamp
                            dist = 0
                            for j in range(d):
                                v = cc[j] - cy[j]
                                if j == a:
                                    v += 1
                                if v < 0:
                                    v = -v
                                if v > dist:
                                    dist = v
                            if dist == L:
                                found = True
                                break
                            queue[tail] = ni
                            tail += 1
                # backward neighbour (base is the site below on axis a)
                if ca > lo[a] and cy[a] - (ca - 1) <= L:
                    er = eoff[a]
                    for j in range(d):
                        if j == a:
                            er += (cc[j] - 1 - lo[j]) * estr[a, j]
                        else:
                            er += (cc[j] - lo[j]) * estr[a, j]
                    if open_bits[er]:
                        ni = i - sstr[a]
                        if visited[ni] != stamp:
                            visited[ni] = stamp
                            dist = 0
                            for j in range(d):
                                v = cc[j] - cy[j]
                                if j == a:
                                    v -= 1
                                if v < 0:
                                    v = -v
                                if v > dist:
                                    dist = v
                            if dist == L:
                                found = True
                                break
                            queue[tail] = ni
                            tail += 1
            # found breaks out of the axis loop; while condition exits
        if found:
            count += 1
    return count
