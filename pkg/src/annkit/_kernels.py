"""Numba-compiled inner loops for scoring and graph traversal.

Everything here operates on flat numpy arrays so the same machinery serves
dense rows, product-quantizer codes, and CSR sparse payloads. Scores are
float32 with sequential float32 accumulation; comparisons happen in "keyed"
space, where keyed = sign * raw (sign is +1 for squared L2 and -1 for inner
product) so that smaller is always better. Ties are broken everywhere by
ascending id, which keeps builds and searches bit-reproducible.

This module is private; the public wrappers live in `vectors`, `query_eval`
and `hnsw`.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Scoring modes. ADC covers both measures (the table already encodes the
# measure); the other three are fixed-measure kernels.
MODE_DENSE_L2 = 0
MODE_DENSE_IP = 1
MODE_ADC = 2
MODE_SPARSE_IP = 3

# Shared placeholders for the array slots a given mode does not use.
EMPTY_F32_2D = np.zeros((0, 0), dtype=np.float32)
EMPTY_U8_2D = np.zeros((0, 0), dtype=np.uint8)
EMPTY_I64 = np.zeros(0, dtype=np.int64)
EMPTY_U32 = np.zeros(0, dtype=np.uint32)
EMPTY_F32 = np.zeros(0, dtype=np.float32)


@njit(cache=True, inline="always")
def _lt(key_a, id_a, key_b, id_b):
    """Strict (key, id) lexicographic less-than."""
    return key_a < key_b or (key_a == key_b and id_a < id_b)


@njit(cache=True, inline="always")
def dot_f32(a, b):
    acc = np.float32(0.0)
    for i in range(a.shape[0]):
        acc += a[i] * b[i]
    return acc


@njit(cache=True, inline="always")
def sqeuclidean_f32(a, b):
    acc = np.float32(0.0)
    for i in range(a.shape[0]):
        d = a[i] - b[i]
        acc += d * d
    return acc


@njit(cache=True, inline="always")
def sparse_dot_f32(a_idx, a_val, b_idx, b_val):
    """Two-pointer merge over sorted index arrays."""
    acc = np.float32(0.0)
    i = 0
    j = 0
    na = a_idx.shape[0]
    nb = b_idx.shape[0]
    while i < na and j < nb:
        ia = a_idx[i]
        ib = b_idx[j]
        if ia == ib:
            acc += a_val[i] * b_val[j]
            i += 1
            j += 1
        elif ia < ib:
            i += 1
        else:
            j += 1
    return acc


@njit(cache=True, inline="always")
def adc_f32(table, code_row):
    acc = np.float32(0.0)
    for j in range(code_row.shape[0]):
        acc += table[j, code_row[j]]
    return acc


@njit(cache=True, inline="always")
def _score_raw(mode, vectors, codes, table, sp_offs, sp_idx, sp_vals,
               q_dense, q_idx, q_vals, i):
    """Raw (un-keyed) score of dataset element i against the query."""
    if mode == MODE_DENSE_L2:
        return sqeuclidean_f32(vectors[i], q_dense)
    elif mode == MODE_DENSE_IP:
        return dot_f32(vectors[i], q_dense)
    elif mode == MODE_ADC:
        return adc_f32(table, codes[i])
    else:
        lo = sp_offs[i]
        hi = sp_offs[i + 1]
        return sparse_dot_f32(sp_idx[lo:hi], sp_vals[lo:hi], q_idx, q_vals)


@njit(cache=True, inline="always")
def _pair_raw(mode, vectors, sp_offs, sp_idx, sp_vals, i, j):
    """Raw score between two dataset elements (construction-time only,
    so there is no ADC branch: building always scores raw payloads)."""
    if mode == MODE_DENSE_L2:
        return sqeuclidean_f32(vectors[i], vectors[j])
    elif mode == MODE_DENSE_IP:
        return dot_f32(vectors[i], vectors[j])
    else:
        ilo = sp_offs[i]
        ihi = sp_offs[i + 1]
        jlo = sp_offs[j]
        jhi = sp_offs[j + 1]
        return sparse_dot_f32(sp_idx[ilo:ihi], sp_vals[ilo:ihi],
                              sp_idx[jlo:jhi], sp_vals[jlo:jhi])


@njit(cache=True)
def scan_keyed(mode, sign, vectors, codes, table, sp_offs, sp_idx, sp_vals,
               q_dense, q_idx, q_vals, n, out):
    """Keyed scores of every element in [0, n) against the query."""
    for i in range(n):
        out[i] = sign * _score_raw(mode, vectors, codes, table, sp_offs,
                                   sp_idx, sp_vals, q_dense, q_idx, q_vals, i)


@njit(cache=True)
def score_one(mode, vectors, codes, table, sp_offs, sp_idx, sp_vals,
              q_dense, q_idx, q_vals, i):
    return _score_raw(mode, vectors, codes, table, sp_offs, sp_idx, sp_vals,
                      q_dense, q_idx, q_vals, i)


@njit(cache=True)
def pair_scores(mode, vectors, sp_offs, sp_idx, sp_vals, base, ids, n, sign,
                out):
    for t in range(n):
        out[t] = sign * _pair_raw(mode, vectors, sp_offs, sp_idx, sp_vals,
                                  base, ids[t])


# ---------------------------------------------------------------------------
# Binary heaps on parallel (key, id) arrays. Min-heaps order by ascending
# (key, id); max-heaps by descending (key, id), so the root of a max-heap is
# the worst retained result and eviction is deterministic under ties.


@njit(cache=True, inline="always")
def _heap_push_min(keys, ids, size, key, ident):
    pos = size
    keys[pos] = key
    ids[pos] = ident
    while pos > 0:
        parent = (pos - 1) >> 1
        if _lt(keys[pos], ids[pos], keys[parent], ids[parent]):
            keys[pos], keys[parent] = keys[parent], keys[pos]
            ids[pos], ids[parent] = ids[parent], ids[pos]
            pos = parent
        else:
            break
    return size + 1


@njit(cache=True, inline="always")
def _heap_pop_min(keys, ids, size):
    size -= 1
    keys[0], keys[size] = keys[size], keys[0]
    ids[0], ids[size] = ids[size], ids[0]
    pos = 0
    while True:
        left = 2 * pos + 1
        if left >= size:
            break
        best = left
        right = left + 1
        if right < size and _lt(keys[right], ids[right], keys[left], ids[left]):
            best = right
        if _lt(keys[best], ids[best], keys[pos], ids[pos]):
            keys[pos], keys[best] = keys[best], keys[pos]
            ids[pos], ids[best] = ids[best], ids[pos]
            pos = best
        else:
            break
    return size


@njit(cache=True, inline="always")
def _heap_push_max(keys, ids, size, key, ident):
    pos = size
    keys[pos] = key
    ids[pos] = ident
    while pos > 0:
        parent = (pos - 1) >> 1
        if _lt(keys[parent], ids[parent], keys[pos], ids[pos]):
            keys[pos], keys[parent] = keys[parent], keys[pos]
            ids[pos], ids[parent] = ids[parent], ids[pos]
            pos = parent
        else:
            break
    return size + 1


@njit(cache=True, inline="always")
def _heap_sift_down_max(keys, ids, size):
    pos = 0
    while True:
        left = 2 * pos + 1
        if left >= size:
            break
        best = left
        right = left + 1
        if right < size and _lt(keys[left], ids[left], keys[right], ids[right]):
            best = right
        if _lt(keys[pos], ids[pos], keys[best], ids[best]):
            keys[pos], keys[best] = keys[best], keys[pos]
            ids[pos], ids[best] = ids[best], ids[pos]
            pos = best
        else:
            break


@njit(cache=True, inline="always")
def _heap_replace_max(keys, ids, size, key, ident):
    keys[0] = key
    ids[0] = ident
    _heap_sift_down_max(keys, ids, size)


@njit(cache=True, inline="always")
def _heap_sort_ascending(keys, ids, size):
    """In-place heapsort of a max-heap into ascending (key, id) order."""
    end = size
    while end > 1:
        end -= 1
        keys[0], keys[end] = keys[end], keys[0]
        ids[0], ids[end] = ids[end], ids[0]
        _heap_sift_down_max(keys, ids, end)


# ---------------------------------------------------------------------------
# Graph traversal.


@njit(cache=True)
def greedy_descent(mode, sign, vectors, codes, table, sp_offs, sp_idx, sp_vals,
                   q_dense, q_idx, q_vals, nbrs, cnt, start_id, stats):
    """Beam-1 walk on one level: hop to the best-scoring neighbor until no
    neighbor improves on the current node. Returns the final node id."""
    cur = start_id
    cur_key = np.float32(sign * _score_raw(mode, vectors, codes, table,
                                           sp_offs, sp_idx, sp_vals, q_dense,
                                           q_idx, q_vals, cur))
    stats[0] += 1
    while True:
        best = cur
        best_key = cur_key
        for t in range(cnt[cur]):
            e = nbrs[cur, t]
            k = np.float32(sign * _score_raw(mode, vectors, codes, table,
                                             sp_offs, sp_idx, sp_vals,
                                             q_dense, q_idx, q_vals, e))
            stats[0] += 1
            if _lt(k, e, best_key, best):
                best = e
                best_key = k
        if best == cur:
            break
        cur = best
        cur_key = best_key
    return cur


@njit(cache=True)
def search_layer(mode, sign, vectors, codes, table, sp_offs, sp_idx, sp_vals,
                 q_dense, q_idx, q_vals, nbrs, cnt, entry_ids, entry_count,
                 ef, visited, mark, cand_keys, cand_ids, res_keys, res_ids,
                 stats):
    """Best-first beam search on one level with a visited set.

    Returns the number of results; res_keys/res_ids hold them sorted
    ascending by (keyed score, id), i.e. best first.
    """
    cand_size = 0
    res_size = 0
    for t in range(entry_count):
        e = entry_ids[t]
        if visited[e] == mark:
            continue
        visited[e] = mark
        k = np.float32(sign * _score_raw(mode, vectors, codes, table, sp_offs,
                                         sp_idx, sp_vals, q_dense, q_idx,
                                         q_vals, e))
        stats[0] += 1
        if res_size < ef:
            cand_size = _heap_push_min(cand_keys, cand_ids, cand_size, k, e)
            res_size = _heap_push_max(res_keys, res_ids, res_size, k, e)
        elif _lt(k, e, res_keys[0], res_ids[0]):
            cand_size = _heap_push_min(cand_keys, cand_ids, cand_size, k, e)
            _heap_replace_max(res_keys, res_ids, res_size, k, e)

    while cand_size > 0:
        cur_key = cand_keys[0]
        cur_id = cand_ids[0]
        cand_size = _heap_pop_min(cand_keys, cand_ids, cand_size)
        if res_size == ef and cur_key > res_keys[0]:
            break
        for t in range(cnt[cur_id]):
            e = nbrs[cur_id, t]
            if visited[e] == mark:
                continue
            visited[e] = mark
            k = np.float32(sign * _score_raw(mode, vectors, codes, table,
                                             sp_offs, sp_idx, sp_vals,
                                             q_dense, q_idx, q_vals, e))
            stats[0] += 1
            if res_size < ef:
                cand_size = _heap_push_min(cand_keys, cand_ids, cand_size, k, e)
                res_size = _heap_push_max(res_keys, res_ids, res_size, k, e)
            elif _lt(k, e, res_keys[0], res_ids[0]):
                cand_size = _heap_push_min(cand_keys, cand_ids, cand_size, k, e)
                _heap_replace_max(res_keys, res_ids, res_size, k, e)

    _heap_sort_ascending(res_keys, res_ids, res_size)
    return res_size


@njit(cache=True)
def select_neighbors(pair_mode, sign, vectors, sp_offs, sp_idx, sp_vals, base,
                     cand_ids, cand_keys, cand_count, max_out, use_heuristic,
                     out_ids):
    """Occlusion-pruning neighbor selection.

    Candidates must be sorted ascending by (keyed distance to base, id). A
    candidate is kept only when it is strictly closer to the base than to
    every neighbor kept before it; rejected candidates backfill remaining
    capacity in distance order. With use_heuristic=False this degrades to
    plain nearest-M truncation.
    """
    if not use_heuristic:
        kept = min(max_out, cand_count)
        for t in range(kept):
            out_ids[t] = cand_ids[t]
        return kept

    discarded = np.empty(cand_count, dtype=np.int32)
    kept = 0
    n_disc = 0
    for c in range(cand_count):
        if kept == max_out:
            break
        cid = cand_ids[c]
        ckey = cand_keys[c]
        keep = True
        for r in range(kept):
            kr = np.float32(sign * _pair_raw(pair_mode, vectors, sp_offs,
                                             sp_idx, sp_vals, cid, out_ids[r]))
            if not ckey < kr:
                keep = False
                break
        if keep:
            out_ids[kept] = cid
            kept += 1
        else:
            discarded[n_disc] = cid
            n_disc += 1
    t = 0
    while kept < max_out and t < n_disc:
        out_ids[kept] = discarded[t]
        kept += 1
        t += 1
    return kept


@njit(cache=True)
def _sort_by_key_id(keys, ids, n):
    """Insertion sort of parallel arrays into ascending (key, id) order.
    Only used on candidate lists of at most a node's degree + 1."""
    for i in range(1, n):
        k = keys[i]
        d = ids[i]
        j = i - 1
        while j >= 0 and _lt(k, d, keys[j], ids[j]):
            keys[j + 1] = keys[j]
            ids[j + 1] = ids[j]
            j -= 1
        keys[j + 1] = k
        ids[j + 1] = d


@njit(cache=True)
def connect_node(pair_mode, sign, vectors, sp_offs, sp_idx, sp_vals, new_id,
                 sel_ids, sel_count, nbrs, cnt, cap, use_heuristic,
                 prune_keys, prune_ids, prune_out):
    """Link a freshly selected node bidirectionally at one level.

    The new node's list becomes the selection. Each selected neighbor gains a
    reverse edge; a neighbor whose list would exceed its capacity is re-pruned
    with the same selection rule, using that neighbor as the base point.
    """
    for t in range(sel_count):
        nbrs[new_id, t] = sel_ids[t]
    cnt[new_id] = sel_count

    for t in range(sel_count):
        e = sel_ids[t]
        deg = cnt[e]
        if deg < cap:
            nbrs[e, deg] = new_id
            cnt[e] = deg + 1
        else:
            total = deg + 1
            for s in range(deg):
                prune_ids[s] = nbrs[e, s]
            prune_ids[deg] = new_id
            pair_scores(pair_mode, vectors, sp_offs, sp_idx, sp_vals, e,
                        prune_ids, total, sign, prune_keys)
            _sort_by_key_id(prune_keys, prune_ids, total)
            kept = select_neighbors(pair_mode, sign, vectors, sp_offs, sp_idx,
                                    sp_vals, e, prune_ids, prune_keys, total,
                                    cap, use_heuristic, prune_out)
            for s in range(kept):
                nbrs[e, s] = prune_out[s]
            cnt[e] = kept


@njit(cache=True)
def insert_at_level(mode, sign, vectors, codes, table, sp_offs, sp_idx,
                    sp_vals, q_dense, q_idx, q_vals, new_id, entry_ids,
                    entry_count, ef_construction, select_cap, link_cap, nbrs,
                    cnt, visited, mark, use_heuristic, cand_keys, cand_ids,
                    res_keys, res_ids, sel_scratch, prune_keys, prune_ids,
                    prune_out, stats):
    """One level of an insertion: beam-search candidates, select neighbors,
    connect. Returns the result count; res_keys/res_ids feed the next level
    down as entry points."""
    res_size = search_layer(mode, sign, vectors, codes, table, sp_offs,
                            sp_idx, sp_vals, q_dense, q_idx, q_vals, nbrs,
                            cnt, entry_ids, entry_count, ef_construction,
                            visited, mark, cand_keys, cand_ids, res_keys,
                            res_ids, stats)
    sel_count = select_neighbors(mode, sign, vectors, sp_offs, sp_idx,
                                 sp_vals, new_id, res_ids, res_keys, res_size,
                                 select_cap, use_heuristic, sel_scratch)
    connect_node(mode, sign, vectors, sp_offs, sp_idx, sp_vals, new_id,
                 sel_scratch, sel_count, nbrs, cnt, link_cap, use_heuristic,
                 prune_keys, prune_ids, prune_out)
    return res_size
