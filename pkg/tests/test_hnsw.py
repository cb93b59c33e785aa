"""Graph index: construction, search, invariants, and persistence."""

import numpy as np
import pytest

from annkit import (
    DenseDataset,
    FormatError,
    HnswConfig,
    HnswIndex,
    Measure,
    ProductQuantizer,
    SparseDataset,
    SparseVector,
    assign_level,
    compute_ground_truth,
    load_index,
    make_evaluator,
    recall_at_k,
    train_pq,
)
from annkit import _kernels


def brute_order(ds, q, measure):
    """All ids sorted exactly the way the index must rank them."""
    ev = make_evaluator(q, ds, measure)
    return sorted(range(ds.n), key=lambda i: (measure.sign * ev.eval(i), i))


def build_dense(rng, n, dim, measure=Measure.SQUARED_L2, config=None, pq=None):
    mat = rng.standard_normal((n, dim)).astype(np.float32)
    ds = DenseDataset(dim=dim, quantizer=pq)
    index = HnswIndex(ds, measure, config or HnswConfig(M=8, seed=0))
    index.add_batch(mat)
    return index, mat


def random_sparse(rng, dim, nnz):
    idx = np.sort(rng.choice(dim, size=nnz, replace=False)).astype(np.uint32)
    vals = (np.abs(rng.standard_normal(nnz)) + 0.1).astype(np.float32)
    return SparseVector(idx, vals)


class TestConfig:
    def test_defaults(self):
        cfg = HnswConfig(M=16)
        assert cfg.M0 == 32
        assert cfg.mL == pytest.approx(1.0 / np.log(16.0))

    def test_validation(self):
        with pytest.raises(ValueError):
            HnswConfig(M=1)
        with pytest.raises(ValueError):
            HnswConfig(M=8, M0=4)            # M0 < M
        with pytest.raises(ValueError):
            HnswConfig(M=8, ef_construction=4)
        with pytest.raises(ValueError):
            HnswConfig(M=8, mL=0.0)

    def test_level_assignment_degenerate(self):
        rng = np.random.default_rng(0)
        assert all(assign_level(rng, 1e-9) == 0 for _ in range(1000))


class TestTinyExactness:
    """At full saturation (n <= M0, ef = n) the graph holds every answer."""

    def check(self, index, ds, queries, measure):
        for q in queries:
            res = index.search(q, k=ds.n, ef=ds.n)
            assert [e[0] for e in res.entries] == brute_order(ds, q, measure)

    def test_dense_l2(self):
        rng = np.random.default_rng(91)
        cfg = HnswConfig(M=32, seed=0)
        index, mat = build_dense(rng, 48, 8, Measure.SQUARED_L2, cfg)
        queries = rng.standard_normal((20, 8)).astype(np.float32)
        self.check(index, index.dataset, queries, Measure.SQUARED_L2)

    def test_dense_ip(self):
        rng = np.random.default_rng(92)
        cfg = HnswConfig(M=32, seed=0)
        index, mat = build_dense(rng, 48, 8, Measure.INNER_PRODUCT, cfg)
        queries = rng.standard_normal((20, 8)).astype(np.float32)
        self.check(index, index.dataset, queries, Measure.INNER_PRODUCT)

    def test_sparse_ip(self):
        rng = np.random.default_rng(93)
        ds = SparseDataset()
        index = HnswIndex(ds, Measure.INNER_PRODUCT, HnswConfig(M=32, seed=0))
        index.add_batch(random_sparse(rng, 40, 10) for _ in range(48))
        queries = [random_sparse(rng, 40, 10) for _ in range(20)]
        self.check(index, ds, queries, Measure.INNER_PRODUCT)


class TestRecall:
    def test_dense_recall_floor(self):
        # Unimodal Gaussian, 10k points: routing must stay reliable.
        rng = np.random.default_rng(94)
        cfg = HnswConfig(M=16, ef_construction=200, seed=0)
        index, mat = build_dense(rng, 10_000, 32, Measure.SQUARED_L2, cfg)
        queries = rng.standard_normal((100, 32)).astype(np.float32)
        truth = compute_ground_truth(index.dataset, queries, k=10,
                                     measure=Measure.SQUARED_L2)
        got = [index.search(q, k=10, ef=64).ids() for q in queries]
        assert recall_at_k(got, truth, 10) >= 0.90

    def test_sparse_recall_floor(self):
        rng = np.random.default_rng(95)
        ds = SparseDataset()
        cfg = HnswConfig(M=16, ef_construction=200, seed=0)
        index = HnswIndex(ds, Measure.INNER_PRODUCT, cfg)
        index.add_batch(random_sparse(rng, 48, 12) for _ in range(1200))
        queries = [random_sparse(rng, 48, 12) for _ in range(25)]
        truth = compute_ground_truth(ds, queries, k=10,
                                     measure=Measure.INNER_PRODUCT)
        got = [index.search(q, k=10, ef=96).ids() for q in queries]
        assert recall_at_k(got, truth, 10) >= 0.80


class TestSaturatedSearchTouchesEachNodeOnce:
    def test_eval_count_equals_n(self):
        # A single-level graph searched at ef = n must score every node
        # exactly once: the visited set admits no repeats, saturation
        # admits no skips.
        rng = np.random.default_rng(96)
        cfg = HnswConfig(M=8, mL=1e-9, seed=0)
        index, mat = build_dense(rng, 300, 6, Measure.SQUARED_L2, cfg)
        assert index.max_level == 0
        for qi in range(10):
            q = rng.standard_normal(6).astype(np.float32)
            res, evals = index.search_with_stats(q, k=10, ef=300)
            assert evals == 300
            want = brute_order(index.dataset, q, Measure.SQUARED_L2)[:10]
            assert [e[0] for e in res.entries] == want


class TestValidation:
    def test_empty_index_searches_empty(self):
        ds = DenseDataset(dim=4)
        index = HnswIndex(ds, Measure.SQUARED_L2)
        res = index.search(np.zeros(4, dtype=np.float32), k=5, ef=10)
        assert len(res) == 0
        assert res.ids().shape == (0,)

    def test_search_params(self):
        ds = DenseDataset(dim=4)
        index = HnswIndex(ds, Measure.SQUARED_L2)
        index.add(np.zeros(4, dtype=np.float32))
        q = np.zeros(4, dtype=np.float32)
        with pytest.raises(ValueError):
            index.search(q, k=0, ef=10)
        with pytest.raises(ValueError):
            index.search(q, k=6, ef=5)

    def test_insert_order_enforced(self):
        ds = DenseDataset(dim=4)
        index = HnswIndex(ds, Measure.SQUARED_L2)
        ds.push(np.zeros(4, dtype=np.float32))
        ds.push(np.ones(4, dtype=np.float32))
        with pytest.raises(ValueError):
            index.insert(1)
        index.insert(0)
        index.insert(1)
        with pytest.raises(ValueError):
            index.insert(1)

    def test_sparse_l2_rejected(self):
        with pytest.raises(ValueError):
            HnswIndex(SparseDataset(), Measure.SQUARED_L2)


class TestGraphShape:
    def test_entry_point_tracks_max_level(self):
        rng = np.random.default_rng(97)
        index, _ = build_dense(rng, 800, 8)
        assert index.max_level == int(index.node_levels.max())
        assert int(index.node_levels[index.entry_point]) == index.max_level

    def test_degree_caps(self):
        rng = np.random.default_rng(98)
        cfg = HnswConfig(M=6, seed=0)
        index, _ = build_dense(rng, 800, 8, config=cfg)
        for ident in range(index.n):
            for level in range(int(index.node_levels[ident]) + 1):
                cap = cfg.M0 if level == 0 else cfg.M
                nbrs = index.neighbors(ident, level)
                assert nbrs.shape[0] <= cap
                assert ident not in nbrs

    def test_neighbors_accessor_validation(self):
        rng = np.random.default_rng(99)
        index, _ = build_dense(rng, 50, 4)
        with pytest.raises(IndexError):
            index.neighbors(50, 0)
        with pytest.raises(ValueError):
            index.neighbors(0, int(index.node_levels[0]) + 1)

    def test_reachability(self):
        # Directed BFS from the entry point over the union of all levels
        # must reach essentially every node.
        rng = np.random.default_rng(100)
        index, _ = build_dense(rng, 10_000, 16,
                               config=HnswConfig(M=12, seed=0))
        seen = np.zeros(index.n, dtype=bool)
        stack = [index.entry_point]
        seen[index.entry_point] = True
        while stack:
            node = stack.pop()
            for level in range(int(index.node_levels[node]) + 1):
                for nb in index.neighbors(node, level):
                    if not seen[nb]:
                        seen[nb] = True
                        stack.append(int(nb))
        assert seen.mean() >= 0.999

    def test_check_invariants_passes_and_detects_damage(self):
        rng = np.random.default_rng(101)
        index, _ = build_dense(rng, 300, 8)
        index.check_invariants()
        nbrs, cnt = index._levels[0]
        assert cnt[0] >= 1
        keep = int(nbrs[0, 0])
        nbrs[0, 0] = 0                       # self-loop
        with pytest.raises(RuntimeError):
            index.check_invariants()
        nbrs[0, 0] = keep
        index.check_invariants()


class TestNeighborSelectionGeometry:
    def run_select(self, points, base, cand, max_out, heuristic=True):
        vectors = np.asarray(points, dtype=np.float32)
        keys = np.array(
            [((vectors[c] - vectors[base]) ** 2).sum() for c in cand],
            dtype=np.float32)
        order = np.lexsort((cand, keys))
        cand_ids = np.asarray(cand, dtype=np.int32)[order]
        cand_keys = keys[order]
        out = np.empty(max_out, dtype=np.int32)
        kept = _kernels.select_neighbors(
            _kernels.MODE_DENSE_L2, np.float32(1.0), vectors,
            _kernels.EMPTY_I64, _kernels.EMPTY_U32, _kernels.EMPTY_F32,
            base, cand_ids, cand_keys, len(cand), max_out, heuristic, out)
        return list(out[:kept])

    def test_collinear_occlusion_and_backfill(self):
        # Points on a line: each farther point is closer to the nearest
        # kept point than to the base, so only the nearest survives the
        # occlusion rule; the rest backfill in distance order.
        points = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]
        assert self.run_select(points, 0, [1, 2, 3], max_out=1) == [1]
        assert self.run_select(points, 0, [1, 2, 3], max_out=3) == [1, 2, 3]

    def test_spread_directions_all_kept(self):
        # Candidates in opposing directions never occlude one another.
        points = [[0.0, 0.0], [1.0, 0.0], [-1.0, 0.05], [0.0, 1.1]]
        assert self.run_select(points, 0, [1, 2, 3], max_out=3) == [1, 2, 3]

    def test_occlusion_beats_distance_order(self):
        # The second-nearest candidate hides behind the nearest; a farther
        # candidate in a fresh direction is kept ahead of it.
        points = [[0.0, 0.0], [1.0, 0.0], [1.6, 0.0], [-2.0, 0.0]]
        assert self.run_select(points, 0, [1, 2, 3], max_out=2) == [1, 3]

    def test_plain_truncation_without_heuristic(self):
        points = [[0.0, 0.0], [1.0, 0.0], [1.6, 0.0], [-2.0, 0.0]]
        got = self.run_select(points, 0, [1, 2, 3], max_out=2,
                              heuristic=False)
        assert got == [1, 2]


class TestDeterminism:
    def test_same_seed_same_bytes(self, tmp_path):
        rng = np.random.default_rng(102)
        mat = rng.standard_normal((400, 16)).astype(np.float32)
        paths = []
        for run in range(2):
            ds = DenseDataset(dim=16)
            index = HnswIndex(ds, Measure.SQUARED_L2, HnswConfig(M=8, seed=7))
            index.add_batch(mat)
            p = tmp_path / f"run{run}.bin"
            index.save(p)
            paths.append(p)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_different_seed_different_graph(self, tmp_path):
        rng = np.random.default_rng(103)
        mat = rng.standard_normal((400, 16)).astype(np.float32)
        blobs = []
        for seed in (0, 1):
            ds = DenseDataset(dim=16)
            index = HnswIndex(ds, Measure.SQUARED_L2,
                              HnswConfig(M=8, seed=seed))
            index.add_batch(mat)
            p = tmp_path / f"seed{seed}.bin"
            index.save(p)
            blobs.append(p.read_bytes())
        assert blobs[0] != blobs[1]


class TestSaveLoad:
    def roundtrip(self, index, queries, tmp_path, name):
        p = tmp_path / name
        index.save(p)
        loaded = load_index(p)
        loaded.check_invariants()
        assert loaded.n == index.n
        assert loaded.measure is index.measure
        assert loaded.config == index.config
        assert loaded.entry_point == index.entry_point
        for q in queries:
            a = index.search(q, k=10, ef=40)
            b = loaded.search(q, k=10, ef=40)
            assert a.entries == b.entries
        return loaded

    def test_dense_identity(self, tmp_path):
        rng = np.random.default_rng(104)
        index, _ = build_dense(rng, 600, 8)
        queries = rng.standard_normal((50, 8)).astype(np.float32)
        self.roundtrip(index, queries, tmp_path, "dense.bin")

    def test_dense_pq(self, tmp_path):
        rng = np.random.default_rng(105)
        sample = rng.standard_normal((400, 8)).astype(np.float32)
        cb = train_pq(sample, m=2, ks=16, iters=10, seed=0)
        index, _ = build_dense(rng, 500, 8, pq=ProductQuantizer(cb))
        queries = rng.standard_normal((50, 8)).astype(np.float32)
        loaded = self.roundtrip(index, queries, tmp_path, "pq.bin")
        assert isinstance(loaded.dataset.quantizer, ProductQuantizer)
        assert loaded.dataset.quantizer.codebook == cb

    def test_sparse(self, tmp_path):
        rng = np.random.default_rng(106)
        ds = SparseDataset()
        index = HnswIndex(ds, Measure.INNER_PRODUCT, HnswConfig(M=8, seed=0))
        index.add_batch(random_sparse(rng, 60, 10) for _ in range(500))
        queries = [random_sparse(rng, 60, 10) for _ in range(50)]
        self.roundtrip(index, queries, tmp_path, "sparse.bin")

    def test_pq_raw_cache_not_required(self, tmp_path):
        # An index saved after dropping raw vectors must load and search.
        rng = np.random.default_rng(107)
        sample = rng.standard_normal((400, 8)).astype(np.float32)
        cb = train_pq(sample, m=2, ks=16, iters=10, seed=0)
        index, _ = build_dense(rng, 300, 8, pq=ProductQuantizer(cb))
        index.dataset.drop_raw_cache()
        p = tmp_path / "nocache.bin"
        index.save(p)
        loaded = load_index(p)
        q = rng.standard_normal(8).astype(np.float32)
        assert len(loaded.search(q, k=5, ef=20)) == 5


class TestLoadErrors:
    def make_file(self, tmp_path):
        rng = np.random.default_rng(108)
        index, _ = build_dense(rng, 80, 4)
        p = tmp_path / "ok.bin"
        index.save(p)
        return p

    def test_bad_magic(self, tmp_path):
        p = self.make_file(tmp_path)
        blob = bytearray(p.read_bytes())
        blob[:4] = b"WHAT"
        p.write_bytes(bytes(blob))
        with pytest.raises(FormatError) as e:
            load_index(p)
        assert e.value.offset == 0

    def test_bad_version(self, tmp_path):
        p = self.make_file(tmp_path)
        blob = bytearray(p.read_bytes())
        blob[4:8] = (99).to_bytes(4, "little")
        p.write_bytes(bytes(blob))
        with pytest.raises(FormatError):
            load_index(p)

    def test_bad_measure_tag(self, tmp_path):
        p = self.make_file(tmp_path)
        blob = bytearray(p.read_bytes())
        blob[8] = 7
        p.write_bytes(bytes(blob))
        with pytest.raises(FormatError):
            load_index(p)

    def test_truncated(self, tmp_path):
        p = self.make_file(tmp_path)
        blob = p.read_bytes()
        p.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(FormatError):
            load_index(p)

    def test_trailing_garbage(self, tmp_path):
        p = self.make_file(tmp_path)
        p.write_bytes(p.read_bytes() + b"\x00")
        with pytest.raises(FormatError):
            load_index(p)
