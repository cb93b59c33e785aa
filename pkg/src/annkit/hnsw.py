"""Hierarchical navigable small-world graph index.

One implementation serves every supported dataset kind, representation, and
measure: construction and search only ever exchange scores with the scoring
kernels, so the graph code never branches on vector layout.

Construction always scores original representations (raw float32 rows, or
the exact sparse payloads), even when the dataset is product-quantized;
queries against a quantized dataset score codes through the per-query
distance table. Levels are drawn geometrically: floor(-ln(U) * mL) with U
uniform in (0, 1].

Everything is deterministic for a fixed seed and insertion order: scoring is
sequential float32, and every comparison breaks ties by ascending id.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dataset import DenseDataset, SparseDataset, _grow_rows, dataset_construction_args
from .errors import FormatError, UnsupportedCombinationError
from .quantizer import PQCodebook, ProductQuantizer
from .query_eval import SearchResults, make_evaluator
from .vectors import Measure

_MAGIC = b"ANNK"
_VERSION = 1

_MEASURE_TAG = {Measure.SQUARED_L2: 0, Measure.INNER_PRODUCT: 1}
_TAG_MEASURE = {v: k for k, v in _MEASURE_TAG.items()}


@dataclass
class HnswConfig:
    """Graph construction parameters.

    M is the neighbor-list capacity on levels >= 1; level 0 allows M0
    (default 2M). mL controls the geometric level distribution (default
    1/ln(M), so roughly a fraction 1/M of nodes reach each next level).
    heuristic_prune selects occlusion-based neighbor selection; switching it
    off falls back to nearest-M truncation.
    """

    M: int = 16
    M0: int | None = None
    ef_construction: int = 200
    mL: float | None = None
    seed: int = 0
    heuristic_prune: bool = True

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"M must be >= 2, got {self.M}")
        if self.M0 is None:
            self.M0 = 2 * self.M
        if self.mL is None:
            self.mL = 1.0 / math.log(self.M)
        if self.M0 < self.M:
            raise ValueError(f"M0 ({self.M0}) must be >= M ({self.M})")
        if self.ef_construction < self.M:
            raise ValueError(
                f"ef_construction ({self.ef_construction}) must be >= M ({self.M})"
            )
        if not self.mL > 0:
            raise ValueError(f"mL must be > 0, got {self.mL}")


def assign_level(rng: np.random.Generator, mL: float) -> int:
    """Draw a node level: floor(-ln(U) * mL), U uniform in (0, 1].

    rng.random() is uniform in [0, 1), so U = 1 - rng.random() keeps the
    logarithm finite; U = 1 maps to level 0.
    """
    if not mL > 0:
        raise ValueError(f"mL must be > 0, got {mL}")
    u = 1.0 - rng.random()
    return int(math.floor(-math.log(u) * mL))


class HnswIndex:
    """A built-in-memory navigable graph over one dataset.

    Nodes are dataset ids. Per level the adjacency is a fixed-capacity
    (nodes x cap) id matrix plus a degree array; only rows of nodes whose
    assigned level reaches that level are meaningful.
    """

    def __init__(self, dataset, measure: Measure, config: HnswConfig | None = None):
        if config is None:
            config = HnswConfig()
        if not isinstance(dataset, (DenseDataset, SparseDataset)):
            raise ValueError(f"unsupported dataset type: {type(dataset).__name__}")
        if isinstance(dataset, SparseDataset) and measure is Measure.SQUARED_L2:
            raise UnsupportedCombinationError(
                "squared L2 over sparse vectors is not supported"
            )
        self.dataset = dataset
        self.measure = measure
        self.config = config
        self.entry_point = -1
        self.max_level = -1
        self._node_levels = np.empty(0, dtype=np.int32)
        # per level: [neighbor-id matrix (cap_n, cap_deg), degree array (cap_n,)]
        self._levels: list[list[np.ndarray]] = []
        self._n_graph = 0
        self._rng = np.random.default_rng(config.seed)
        self._sign = np.float32(measure.sign)

        self._visited = np.zeros(0, dtype=np.int64)
        self._mark = 0
        self._cand_keys = np.empty(0, dtype=np.float32)
        self._cand_ids = np.empty(0, dtype=np.int32)
        self._res_keys = np.empty(0, dtype=np.float32)
        self._res_ids = np.empty(0, dtype=np.int32)
        self._entries = np.empty(0, dtype=np.int32)
        self._sel_buf = np.empty(config.M0, dtype=np.int32)
        self._prune_keys = np.empty(config.M0 + 1, dtype=np.float32)
        self._prune_ids = np.empty(config.M0 + 1, dtype=np.int32)
        self._prune_out = np.empty(config.M0, dtype=np.int32)
        self._stats = np.zeros(1, dtype=np.int64)

    @property
    def n(self) -> int:
        """Number of nodes in the graph."""
        return self._n_graph

    @property
    def node_levels(self) -> np.ndarray:
        """(n,) int32 view of each node's assigned top level."""
        return self._node_levels[: self._n_graph]

    def neighbors(self, ident: int, level: int) -> np.ndarray:
        """Copy of node *ident*'s neighbor ids at *level*.

        Args:
            ident: node id, in insertion order.
            level: graph level, at most the node's own level.

        Returns:
            int32 array of neighbor ids in stored order.
        """
        ident = int(ident)
        if not 0 <= ident < self._n_graph:
            raise IndexError(f"id {ident} out of range [0, {self._n_graph})")
        if not 0 <= level <= int(self._node_levels[ident]):
            raise ValueError(
                f"node {ident} has no level {level} "
                f"(its level is {int(self._node_levels[ident])})"
            )
        nbrs, cnt = self._levels[level]
        return nbrs[ident, : cnt[ident]].copy()

    # ------------------------------------------------------------------
    # Construction.

    def add(self, v) -> int:
        """Push one vector into the dataset and insert it into the graph."""
        ident = self.dataset.push(v)
        self.insert(ident)
        return ident

    def add_batch(self, data) -> range:
        """Push and insert many vectors; dense input is an (n, d) matrix,
        sparse input an iterable of SparseVector. Returns the id range."""
        start = self.dataset.n
        if isinstance(self.dataset, DenseDataset):
            self.dataset.push_batch(data)
        else:
            for v in data:
                self.dataset.push(v)
        for ident in range(start, self.dataset.n):
            self.insert(ident)
        return range(start, self.dataset.n)

    def _grow_scratch(self, n: int) -> None:
        if self._visited.shape[0] < n:
            old = self._visited.shape[0]
            grown = np.zeros(max(n, old * 2, 16), dtype=np.int64)
            grown[:old] = self._visited
            self._visited = grown
        if self._cand_keys.shape[0] < n + 1:
            self._cand_keys = np.empty(max(n + 1, 16), dtype=np.float32)
            self._cand_ids = np.empty(max(n + 1, 16), dtype=np.int32)

    def _ensure_result_capacity(self, want: int) -> None:
        if self._res_keys.shape[0] < want + 1:
            self._res_keys = np.empty(want + 1, dtype=np.float32)
            self._res_ids = np.empty(want + 1, dtype=np.int32)
            self._entries = np.empty(want + 1, dtype=np.int32)

    def _level_arrays(self, level: int, n: int):
        """Adjacency arrays for a level, grown to hold at least n rows."""
        cfg = self.config
        while len(self._levels) <= level:
            cap = cfg.M0 if len(self._levels) == 0 else cfg.M
            self._levels.append(
                [np.empty((0, cap), dtype=np.int32), np.zeros(0, dtype=np.int32)]
            )
        pair = self._levels[level]
        if pair[0].shape[0] < n:
            pair[0] = _grow_rows(pair[0], n)
            old = pair[1].shape[0]
            grown = np.zeros(max(n, old * 2, 16), dtype=np.int32)
            grown[:old] = pair[1][:old]
            pair[1] = grown
        return pair

    def _query_args_for_node(self, ident: int) -> tuple:
        """Scoring-kernel arguments for construction: node *ident* as the
        query, scored against original representations."""
        pair_mode, vectors, sp_offs, sp_idx, sp_vals = dataset_construction_args(
            self.dataset, self.measure
        )
        if isinstance(self.dataset, SparseDataset):
            lo = sp_offs[ident]
            hi = sp_offs[ident + 1]
            return (pair_mode, vectors, _kernels.EMPTY_U8_2D, _kernels.EMPTY_F32_2D,
                    sp_offs, sp_idx, sp_vals,
                    _kernels.EMPTY_F32, sp_idx[lo:hi], sp_vals[lo:hi])
        return (pair_mode, vectors, _kernels.EMPTY_U8_2D, _kernels.EMPTY_F32_2D,
                sp_offs, sp_idx, sp_vals,
                vectors[ident], _kernels.EMPTY_U32, _kernels.EMPTY_F32)

    def insert(self, ident: int) -> None:
        """Insert dataset item *ident* (the most recently pushed id) into the
        graph at a freshly drawn level."""
        ident = int(ident)
        if ident != self._n_graph:
            raise ValueError(
                f"insert order must follow push order: expected id "
                f"{self._n_graph}, got {ident}"
            )
        if ident >= self.dataset.n:
            raise ValueError(f"id {ident} has not been pushed (n={self.dataset.n})")
        cfg = self.config
        level = assign_level(self._rng, cfg.mL)

        n = ident + 1
        self._node_levels = _grow_rows(self._node_levels, n)
        self._node_levels[ident] = level
        self._grow_scratch(n)
        self._ensure_result_capacity(cfg.ef_construction)
        self._n_graph = n

        if self.entry_point < 0:
            for lev in range(level + 1):
                self._level_arrays(lev, n)
            self.entry_point = ident
            self.max_level = level
            return

        args = self._query_args_for_node(ident)
        ep = self.entry_point

        for lev in range(self.max_level, level, -1):
            nbrs, cnt = self._levels[lev]
            ep = int(_kernels.greedy_descent(
                args[0], self._sign, *args[1:], nbrs, cnt, ep, self._stats,
            ))

        self._entries[0] = ep
        entry_count = 1
        for lev in range(min(level, self.max_level), -1, -1):
            nbrs, cnt = self._level_arrays(lev, n)
            cap = cfg.M0 if lev == 0 else cfg.M
            self._mark += 1
            res_size = int(_kernels.insert_at_level(
                args[0], self._sign, *args[1:],
                ident, self._entries, entry_count, cfg.ef_construction,
                cap, cap, nbrs, cnt, self._visited, self._mark,
                cfg.heuristic_prune,
                self._cand_keys, self._cand_ids, self._res_keys, self._res_ids,
                self._sel_buf, self._prune_keys, self._prune_ids,
                self._prune_out, self._stats,
            ))
            self._entries[:res_size] = self._res_ids[:res_size]
            entry_count = res_size

        if level > self.max_level:
            for lev in range(level + 1):
                self._level_arrays(lev, n)
            self.max_level = level
            self.entry_point = ident

    # ------------------------------------------------------------------
    # Search.

    def search(self, q, k: int, ef: int) -> SearchResults:
        """Top-k search with beam width ef (ef >= k).

        Greedy single-candidate descent through the upper levels, then a
        beam search at level 0; returns the k best under the measure with
        raw-orientation scores.
        """
        results, _ = self.search_with_stats(q, k, ef)
        return results

    def search_with_stats(self, q, k: int, ef: int) -> tuple[SearchResults, int]:
        """Like `search`, also returning the number of score evaluations."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if ef < k:
            raise ValueError(f"ef ({ef}) must be >= k ({k})")
        if self.entry_point < 0:
            return SearchResults(entries=[], k=k), 0

        evaluator = make_evaluator(q, self.dataset, self.measure)
        args = evaluator.kernel_args()
        n = self._n_graph
        self._grow_scratch(n)
        self._ensure_result_capacity(min(ef, n))
        self._stats[0] = 0

        ep = self.entry_point
        for lev in range(self.max_level, 0, -1):
            nbrs, cnt = self._levels[lev]
            ep = int(_kernels.greedy_descent(
                args[0], self._sign, *args[1:], nbrs, cnt, ep, self._stats,
            ))

        nbrs, cnt = self._levels[0]
        self._entries[0] = ep
        self._mark += 1
        m = int(_kernels.search_layer(
            args[0], self._sign, *args[1:], nbrs, cnt, self._entries, 1, ef,
            self._visited, self._mark,
            self._cand_keys, self._cand_ids, self._res_keys, self._res_ids,
            self._stats,
        ))
        take = min(k, m)
        sign = float(self._sign)
        entries = [
            (int(self._res_ids[i]), sign * float(self._res_keys[i]))
            for i in range(take)
        ]
        return SearchResults(entries=entries, k=k), int(self._stats[0])

    # ------------------------------------------------------------------
    # Validation.

    def check_invariants(self) -> None:
        """Raise RuntimeError if any structural invariant is violated."""
        problems = self._graph_problems()
        if problems:
            raise RuntimeError("graph invariants violated: " + "; ".join(problems))

    def _graph_problems(self) -> list[str]:
        cfg = self.config
        n = self._n_graph
        problems = []
        if n == 0:
            if self.entry_point != -1 or self.max_level != -1:
                problems.append("empty graph must have entry_point=max_level=-1")
            return problems
        levels = self._node_levels[:n]
        if np.any(levels < 0):
            problems.append("negative node level")
            return problems
        top = int(levels.max())
        if self.max_level != top:
            problems.append(
                f"max_level {self.max_level} != highest node level {top}"
            )
        if not 0 <= self.entry_point < n:
            problems.append(f"entry_point {self.entry_point} out of range")
            return problems
        if int(levels[self.entry_point]) != self.max_level:
            problems.append("entry_point is not at max_level")
        if len(self._levels) < top + 1:
            problems.append(f"missing adjacency arrays above level "
                            f"{len(self._levels) - 1}")
            return problems

        ids_row = None
        for lev in range(top + 1):
            nbrs, cnt = self._levels[lev]
            cap = cfg.M0 if lev == 0 else cfg.M
            mask = levels >= lev
            node_ids = np.nonzero(mask)[0]
            degs = cnt[node_ids]
            if np.any(degs < 0) or np.any(degs > cap):
                problems.append(f"level {lev}: degree out of [0, {cap}]")
                continue
            if ids_row is None or ids_row.shape[0] < nbrs.shape[1]:
                ids_row = np.arange(nbrs.shape[1])
            rows = nbrs[node_ids]
            valid = ids_row[: nbrs.shape[1]][None, :] < degs[:, None]
            neigh = np.where(valid, rows, -1)
            used = neigh[valid]
            if used.size == 0:
                continue
            if np.any(used < 0) or np.any(used >= n):
                problems.append(f"level {lev}: neighbor id out of range")
                continue
            if np.any(levels[used] < lev):
                problems.append(f"level {lev}: neighbor below its level")
            if np.any(neigh == node_ids[:, None]):
                problems.append(f"level {lev}: self-loop")
            srt = np.sort(np.where(valid, rows, np.iinfo(np.int32).max), axis=1)
            dup = (srt[:, 1:] == srt[:, :-1]) & (srt[:, 1:] != np.iinfo(np.int32).max)
            if np.any(dup):
                problems.append(f"level {lev}: duplicate neighbor in a list")
        return problems

    # ------------------------------------------------------------------
    # Serialization.

    def save(self, path) -> None:
        """Write the index (config, dataset, graph) to *path*.

        The byte stream is fully determined by the index contents, so equal
        builds produce equal files.
        """
        cfg = self.config
        ds = self.dataset
        out = bytearray()
        out += _MAGIC
        out += struct.pack("<I", _VERSION)
        out += struct.pack("<B", _MEASURE_TAG[self.measure])
        out += struct.pack(
            "<IIIdqB", cfg.M, cfg.M0, cfg.ef_construction, cfg.mL, cfg.seed,
            1 if cfg.heuristic_prune else 0,
        )

        if isinstance(ds, SparseDataset):
            offs, idx, vals = ds.csr_views()
            out += struct.pack("<BB", 1, 0)
            out += struct.pack("<QQ", ds.n, ds.total_nnz)
            out += offs.astype("<u8").tobytes()
            out += idx.astype("<u4", copy=False).tobytes()
            out += vals.astype("<f4", copy=False).tobytes()
        else:
            is_pq = isinstance(ds.quantizer, ProductQuantizer)
            out += struct.pack("<BB", 0, 1 if is_pq else 0)
            out += struct.pack("<IQ", ds.dim, ds.n)
            if is_pq:
                cb = ds.quantizer.codebook
                out += struct.pack("<III", cb.m, cb.ks, cb.dsub)
                out += cb.centroids.astype("<f4", copy=False).tobytes()
                out += ds.payload_matrix().astype("<u1", copy=False).tobytes()
            else:
                out += ds.payload_matrix().astype("<f4", copy=False).tobytes()

        n = self._n_graph
        out += struct.pack("<qi", self.entry_point, self.max_level)
        out += self._node_levels[:n].astype("<i4", copy=False).tobytes()
        for lev in range(self.max_level + 1):
            nbrs, cnt = self._levels[lev]
            for node in np.nonzero(self._node_levels[:n] >= lev)[0]:
                deg = int(cnt[node])
                out += struct.pack("<I", deg)
                out += nbrs[node, :deg].astype("<i4", copy=False).tobytes()

        with open(path, "wb") as f:
            f.write(bytes(out))


class _Reader:
    """Cursor over an index file's bytes; every read is bounds-checked."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int, what: str) -> bytes:
        if self.pos + count > len(self.data):
            raise FormatError(f"truncated while reading {what}", offset=self.pos)
        chunk = self.data[self.pos : self.pos + count]
        self.pos += count
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def array(self, dtype: str, count: int, what: str) -> np.ndarray:
        item = np.dtype(dtype).itemsize
        raw = self.take(item * count, what)
        return np.frombuffer(raw, dtype=dtype).copy()


def load_index(path) -> HnswIndex:
    """Read an index written by `HnswIndex.save`, validating every invariant.

    Any structural violation raises FormatError; a loaded index never holds
    a raw cache for quantized data (construction is over).
    """
    with open(path, "rb") as f:
        data = f.read()
    r = _Reader(data)

    if r.take(4, "magic") != _MAGIC:
        raise FormatError("bad magic bytes", offset=0)
    (version,) = r.unpack("<I", "version")
    if version != _VERSION:
        raise FormatError(f"unsupported format version {version}", offset=4)
    (mtag,) = r.unpack("<B", "measure")
    if mtag not in _TAG_MEASURE:
        raise FormatError(f"unknown measure tag {mtag}", offset=r.pos - 1)
    measure = _TAG_MEASURE[mtag]
    m_, m0, efc, ml, seed, heur = r.unpack("<IIIdqB", "config")
    if heur > 1:
        raise FormatError(f"bad heuristic flag {heur}", offset=r.pos - 1)
    try:
        cfg = HnswConfig(M=m_, M0=m0, ef_construction=efc, mL=ml, seed=seed,
                         heuristic_prune=bool(heur))
    except ValueError as e:
        raise FormatError(f"invalid config: {e}", offset=13) from e

    kind, quant = r.unpack("<BB", "dataset header")
    if kind == 1:
        if quant != 0:
            raise FormatError("sparse data cannot be quantized", offset=r.pos - 1)
        if measure is Measure.SQUARED_L2:
            raise FormatError("sparse index under squared L2", offset=r.pos - 2)
        n, nnz = r.unpack("<QQ", "sparse sizes")
        offs = r.array("<u8", n + 1, "row offsets").astype(np.int64)
        idx = r.array("<u4", nnz, "sparse indices").astype(np.uint32)
        vals = r.array("<f4", nnz, "sparse values").astype(np.float32)
        if offs[0] != 0 or offs[-1] != nnz or np.any(np.diff(offs) < 0):
            raise FormatError("row offsets are inconsistent")
        if not np.all(np.isfinite(vals)):
            raise FormatError("sparse values contain NaN or Inf")
        if np.any(vals == 0.0):
            raise FormatError("sparse values contain zeros")
        for i in range(n):
            row = idx[offs[i] : offs[i + 1]]
            if row.shape[0] > 1 and not np.all(row[1:] > row[:-1]):
                raise FormatError(f"row {i} indices not strictly increasing")
        ds = SparseDataset()
        ds.n = int(n)
        ds._nnz = int(nnz)
        ds._offsets = offs
        ds._indices = idx
        ds._values = vals
    elif kind == 0:
        dim, n = r.unpack("<IQ", "dense sizes")
        if dim < 1:
            raise FormatError(f"bad dimensionality {dim}")
        if quant == 1:
            pm, ks, dsub = r.unpack("<III", "codebook shape")
            if pm * dsub != dim:
                raise FormatError(
                    f"codebook {pm}x{dsub} does not cover {dim} dims"
                )
            cents = r.array("<f4", pm * ks * dsub, "centroids")
            try:
                cb = PQCodebook(cents.reshape(pm, ks, dsub))
            except ValueError as e:
                raise FormatError(f"invalid codebook: {e}") from e
            codes = r.array("<u1", n * pm, "codes").reshape(n, pm)
            if ks < 256 and codes.size and int(codes.max()) >= ks:
                raise FormatError(f"code entry out of range [0, {ks})")
            ds = DenseDataset(int(dim), ProductQuantizer(cb), keep_raw=False)
            ds.n = int(n)
            ds._codes = np.ascontiguousarray(codes, dtype=np.uint8)
        elif quant == 0:
            rows = r.array("<f4", n * dim, "vectors").reshape(n, dim)
            if not np.all(np.isfinite(rows)):
                raise FormatError("vectors contain NaN or Inf")
            ds = DenseDataset(int(dim))
            ds.n = int(n)
            ds._raw = np.ascontiguousarray(rows, dtype=np.float32)
        else:
            raise FormatError(f"unknown quantizer tag {quant}", offset=r.pos - 1)
    else:
        raise FormatError(f"unknown dataset kind {kind}", offset=r.pos - 2)

    index = HnswIndex(ds, measure, cfg)
    n = ds.n
    entry_point, max_level = r.unpack("<qi", "graph header")
    index.entry_point = int(entry_point)
    index.max_level = int(max_level)
    index._node_levels = r.array("<i4", n, "node levels").astype(np.int32)
    index._n_graph = n
    if n > 0:
        if max_level < 0:
            raise FormatError(f"bad max_level {max_level} for n={n}")
        for lev in range(max_level + 1):
            cap = cfg.M0 if lev == 0 else cfg.M
            nbrs = np.full((n, cap), -1, dtype=np.int32)
            cnt = np.zeros(n, dtype=np.int32)
            for node in np.nonzero(index._node_levels[:n] >= lev)[0]:
                (deg,) = r.unpack("<I", f"degree (level {lev}, node {node})")
                if deg > cap:
                    raise FormatError(
                        f"degree {deg} exceeds capacity {cap} at level {lev}",
                        offset=r.pos - 4,
                    )
                nbrs[node, :deg] = r.array(
                    "<i4", deg, f"neighbors (level {lev}, node {node})"
                )
                cnt[node] = deg
            index._levels.append([nbrs, cnt])
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes", offset=r.pos)

    problems = index._graph_problems()
    if problems:
        raise FormatError("invalid graph: " + "; ".join(problems))
    index._grow_scratch(n)
    return index
