"""Reference implementations the tests trust instead of the library.

Everything here is written the slow, obvious way (scalar Python loops, dict
merges, exhaustive scans) so that agreement with the library is meaningful.
Accumulation is float32 like the production kernels, in the same canonical
order (ascending position / ascending shared index), which keeps honest
tolerances tight.
"""

from __future__ import annotations

import numpy as np


def naive_dot(a, b) -> float:
    """Inner product, scalar float32 accumulation in index order."""
    acc = np.float32(0.0)
    for i in range(len(a)):
        acc = np.float32(acc + np.float32(np.float32(a[i]) * np.float32(b[i])))
    return float(acc)


def naive_squared_l2(a, b) -> float:
    """Squared Euclidean distance, scalar float32 accumulation."""
    acc = np.float32(0.0)
    for i in range(len(a)):
        d = np.float32(np.float32(a[i]) - np.float32(b[i]))
        acc = np.float32(acc + np.float32(d * d))
    return float(acc)


def naive_sparse_dot(a_idx, a_val, b_idx, b_val) -> float:
    """Sparse inner product via a dict merge, accumulated over the shared
    indices in ascending order (the canonical order)."""
    bmap = {int(i): np.float32(v) for i, v in zip(b_idx, b_val)}
    acc = np.float32(0.0)
    for i, v in zip(a_idx, a_val):
        if int(i) in bmap:
            acc = np.float32(acc + np.float32(np.float32(v) * bmap[int(i)]))
    return float(acc)


def naive_adc(table, code) -> float:
    """Distance-table sum, scalar float32 accumulation."""
    acc = np.float32(0.0)
    for j in range(len(code)):
        acc = np.float32(acc + np.float32(table[j][int(code[j])]))
    return float(acc)


def subspace_argmin(v_sub, centroids_j) -> int:
    """Index of the squared-L2-nearest centroid, lowest index on ties."""
    best = None
    best_d = None
    for c in range(len(centroids_j)):
        d = 0.0
        for t in range(len(v_sub)):
            diff = float(v_sub[t]) - float(centroids_j[c][t])
            d += diff * diff
        if best is None or d < best_d:
            best = c
            best_d = d
    return best


def brute_force_ranking(score_of, n, sign) -> list[int]:
    """All ids sorted by (sign * score, id) ascending; score_of(i) gives the
    raw score of element i."""
    keyed = [(sign * score_of(i), i) for i in range(n)]
    keyed.sort()
    return [i for _, i in keyed]


def topk_by_sort(stream, k, sign) -> list[tuple[int, float]]:
    """Sort-then-truncate reference for the bounded top-k accumulator.

    stream is an iterable of (id, score); later duplicates of an id are kept
    as separate entries, matching an accumulator that never deduplicates.
    """
    entries = sorted(stream, key=lambda e: (sign * e[1], e[0]))
    return entries[:k]
