"""Per-query scoring state and top-k ranking.

An evaluator is created fresh for each query against one frozen dataset. For
exact representations it scores payloads directly with the measure's kernel;
for product-quantized datasets it precomputes the query's distance table once
and scores codes by table lookups. Either way the unified `eval(id)` is the
only scoring surface the search loop sees.

Ranking is deterministic: all comparisons happen on (keyed score, id) where
keyed = sign * raw puts both measures in smaller-is-better orientation and
ties always resolve to the lower id.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dataset import DenseDataset, SparseDataset
from .quantizer import ProductQuantizer, build_distance_table
from .vectors import Measure, SparseVector, as_dense
from .errors import UnsupportedCombinationError


@dataclass
class SearchResults:
    """Ranked (id, score) pairs, best first under the measure's orientation.

    Scores keep their raw orientation (distances for squared L2, similarities
    for inner product); order is by (sign * score, id) ascending.
    """

    entries: list[tuple[int, float]]
    k: int

    def ids(self) -> np.ndarray:
        return np.array([e[0] for e in self.entries], dtype=np.int32)

    def scores(self) -> np.ndarray:
        return np.array([e[1] for e in self.entries], dtype=np.float32)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


class QueryEvaluator:
    """Scoring state for one query against one dataset.

    mode is "exact" (score stored payloads directly) or "tabled" (score PQ
    codes through a per-query distance table). Construct via make_evaluator.
    """

    __slots__ = ("query", "measure", "mode", "_n", "_args")

    def __init__(self, query, measure: Measure, mode: str, n: int, args: tuple):
        self.query = query
        self.measure = measure
        self.mode = mode
        self._n = n
        self._args = args

    def kernel_args(self) -> tuple:
        """The ten positional scoring-kernel arguments:
        (mode, vectors, codes, table, sp_offs, sp_idx, sp_vals,
        q_dense, q_idx, q_vals)."""
        return self._args

    def eval(self, ident: int) -> float:
        """Score of dataset item *ident* against the query (raw orientation)."""
        ident = int(ident)
        if not 0 <= ident < self._n:
            raise IndexError(f"id {ident} out of range [0, {self._n})")
        return float(_kernels.score_one(*self._args, ident))


def make_evaluator(q, ds, measure: Measure) -> QueryEvaluator:
    """Build the evaluator appropriate for the dataset's kind and quantizer.

    Identity datasets get exact evaluation; PQ datasets get a distance table
    built here, exactly once. Raises on query/dataset kind mismatches and for
    squared L2 over sparse data.
    """
    if isinstance(ds, SparseDataset):
        if not isinstance(q, SparseVector):
            raise ValueError("sparse dataset requires a SparseVector query")
        if measure is Measure.SQUARED_L2:
            raise UnsupportedCombinationError(
                "squared L2 over sparse vectors is not supported"
            )
        offs, idx, vals = ds.csr_views()
        args = (_kernels.MODE_SPARSE_IP, _kernels.EMPTY_F32_2D,
                _kernels.EMPTY_U8_2D, _kernels.EMPTY_F32_2D,
                offs, idx, vals,
                _kernels.EMPTY_F32, q.indices, q.values)
        return QueryEvaluator(q, measure, "exact", ds.n, args)

    if not isinstance(ds, DenseDataset):
        raise ValueError(f"unsupported dataset type: {type(ds).__name__}")
    if isinstance(q, SparseVector):
        raise ValueError("dense dataset requires a dense query")
    arr = as_dense(q, ds.dim)

    if isinstance(ds.quantizer, ProductQuantizer):
        table = build_distance_table(arr, ds.quantizer.codebook, measure)
        args = (_kernels.MODE_ADC, _kernels.EMPTY_F32_2D,
                ds.payload_matrix(), table,
                _kernels.EMPTY_I64, _kernels.EMPTY_U32, _kernels.EMPTY_F32,
                _kernels.EMPTY_F32, _kernels.EMPTY_U32, _kernels.EMPTY_F32)
        return QueryEvaluator(arr, measure, "tabled", ds.n, args)

    mode = (_kernels.MODE_DENSE_L2 if measure is Measure.SQUARED_L2
            else _kernels.MODE_DENSE_IP)
    args = (mode, ds.payload_matrix(),
            _kernels.EMPTY_U8_2D, _kernels.EMPTY_F32_2D,
            _kernels.EMPTY_I64, _kernels.EMPTY_U32, _kernels.EMPTY_F32,
            arr, _kernels.EMPTY_U32, _kernels.EMPTY_F32)
    return QueryEvaluator(arr, measure, "exact", ds.n, args)


class TopK:
    """Bounded accumulator of the k best (id, score) pairs seen so far.

    Backed by a heap whose root is the worst retained entry, so a push either
    evicts that entry or is discarded. `threshold()` exposes the current
    k-th best raw score for pruning; it only ever improves once k entries
    are held.
    """

    __slots__ = ("k", "measure", "_sign", "_heap")

    def __init__(self, k: int, measure: Measure):
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        self.k = k
        self.measure = measure
        self._sign = measure.sign
        # entries are (-keyed, -id, id, raw); heap root = worst retained
        self._heap: list[tuple[float, int, int, float]] = []

    def push(self, ident: int, score: float) -> None:
        keyed = self._sign * score
        entry = (-keyed, -ident, ident, score)
        if len(self._heap) < self.k:
            heapq.heappush(self._heap, entry)
        elif entry > self._heap[0]:
            # strictly better than the worst under (keyed, id)
            heapq.heapreplace(self._heap, entry)

    def threshold(self) -> float | None:
        """Raw score of the current k-th best entry; None until k are held."""
        if len(self._heap) < self.k:
            return None
        return self._heap[0][3]

    def finalize(self) -> SearchResults:
        """Emit retained entries sorted best-first."""
        entries = sorted(
            ((ident, score) for _, _, ident, score in self._heap),
            key=lambda e: (self._sign * e[1], e[0]),
        )
        return SearchResults(entries=entries, k=self.k)
