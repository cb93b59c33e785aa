"""Command-line interface: build, search, ground-truth, bench.

Exit codes: 0 on success, 2 for malformed input files, 3 for invalid
arguments or argument combinations.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .bench import (
    bench_sweep,
    compute_ground_truth,
    render_benchmark_figure,
    write_benchmark_csv,
)
from .dataset import DenseDataset, SparseDataset
from .errors import FormatError
from .hnsw import HnswConfig, HnswIndex, load_index
from .io import read_fvecs, read_ivecs, read_sparse_csr, write_ivecs
from .quantizer import ProductQuantizer, train_pq
from .vectors import Measure

# PQ codebooks train on at most this many vectors, sampled with the build
# seed when the dataset is larger.
TRAIN_SAMPLE_CAP = 262_144

_EXIT_OK = 0
_EXIT_FORMAT = 2
_EXIT_USAGE = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on bad usage; this CLI reserves 2 for file
    format errors, so usage problems exit 3 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(_EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _measure_from_flag(value: str) -> Measure:
    return Measure.SQUARED_L2 if value == "l2" else Measure.INNER_PRODUCT


def _load_queries(path, kind: str):
    """Queries in the representation matching a dataset kind."""
    if kind == "sparse":
        return list(read_sparse_csr(path).rows())
    return read_fvecs(path)


def cmd_build(args) -> int:
    measure = _measure_from_flag(args.metric)
    config = HnswConfig(M=args.m, ef_construction=args.efc, seed=args.seed)

    if args.format == "csr":
        if args.quantizer == "pq":
            raise ValueError("sparse data cannot be product-quantized")
        csr = read_sparse_csr(args.data)
        dataset = SparseDataset()
        index = HnswIndex(dataset, measure, config)
        index.add_batch(csr.rows())
    else:
        data = read_fvecs(args.data)
        if args.quantizer == "pq":
            sample = data
            if data.shape[0] > TRAIN_SAMPLE_CAP:
                rng = np.random.default_rng(args.seed)
                rows = np.sort(rng.choice(data.shape[0], size=TRAIN_SAMPLE_CAP,
                                          replace=False))
                sample = data[rows]
            codebook = train_pq(sample, m=args.pq_m, ks=args.pq_ks,
                                iters=args.train_iters, seed=args.seed)
            dataset = DenseDataset(data.shape[1], ProductQuantizer(codebook))
        else:
            dataset = DenseDataset(data.shape[1])
        index = HnswIndex(dataset, measure, config)
        index.add_batch(data)

    index.dataset.drop_raw_cache()
    index.save(args.output)
    print(f"built index: n={index.n} levels={index.max_level + 1} "
          f"-> {args.output}")
    return _EXIT_OK


def cmd_search(args) -> int:
    index = load_index(args.index)
    queries = _load_queries(args.queries, index.dataset.kind)
    if args.k < 1:
        raise ValueError(f"--k must be >= 1, got {args.k}")
    ids = np.full((len(queries), args.k), -1, dtype=np.int32)
    for i, q in enumerate(queries):
        results = index.search(q, args.k, args.ef)
        row = results.ids()
        ids[i, : row.shape[0]] = row
    write_ivecs(args.output, ids)
    print(f"searched {len(queries)} queries (k={args.k}, ef={args.ef}) "
          f"-> {args.output}")
    return _EXIT_OK


def cmd_ground_truth(args) -> int:
    measure = _measure_from_flag(args.measure)
    if args.format == "csr":
        dataset = SparseDataset()
        for v in read_sparse_csr(args.data).rows():
            dataset.push(v)
        queries = list(read_sparse_csr(args.queries).rows())
    else:
        data = read_fvecs(args.data)
        dataset = DenseDataset(data.shape[1])
        dataset.push_batch(data)
        queries = read_fvecs(args.queries)
    truth = compute_ground_truth(dataset, queries, args.k, measure)
    write_ivecs(args.output, truth)
    print(f"ground truth for {len(queries)} queries (k={args.k}) "
          f"-> {args.output}")
    return _EXIT_OK


def cmd_bench(args) -> int:
    index = load_index(args.index)
    queries = _load_queries(args.queries, index.dataset.kind)
    truth = read_ivecs(args.ground_truth)
    try:
        ef_list = [int(tok) for tok in args.ef_list.split(",") if tok.strip()]
    except ValueError as e:
        raise ValueError(f"--ef-list must be comma-separated integers: {e}")
    records = bench_sweep(index, queries, truth, args.k, ef_list)
    write_benchmark_csv(records, args.csv)
    figure_path = Path(args.csv).with_suffix(".png")
    render_benchmark_figure(records, figure_path)
    for r in records:
        print(f"ef={r.ef} recall@{r.k}={r.recall_at_k:.4f} "
              f"qps={r.qps:.1f} latency={r.mean_latency_us:.1f}us")
    print(f"wrote {args.csv} and {figure_path}")
    return _EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="annkit",
                     description="approximate nearest-neighbor indexing, "
                                 "search, and benchmarking")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build and save an index")
    p.add_argument("--data", required=True, help="input vector file")
    p.add_argument("--format", choices=["fvecs", "csr"], default="fvecs")
    p.add_argument("--metric", choices=["l2", "ip"], default="l2")
    p.add_argument("--m", type=int, default=16, help="graph degree parameter")
    p.add_argument("--efc", type=int, default=200, help="construction beam width")
    p.add_argument("--quantizer", choices=["none", "pq"], default="none")
    p.add_argument("--pq-m", type=int, default=16, help="PQ subspace count")
    p.add_argument("--pq-ks", type=int, default=256,
                   help="PQ centroids per subspace")
    p.add_argument("--train-iters", type=int, default=25,
                   help="k-means iterations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True, help="index file to write")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("search", help="query a saved index")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True,
                   help="query file (fvecs for dense indexes, csr for sparse)")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--ef", type=int, default=100, help="search beam width")
    p.add_argument("--output", required=True,
                   help="ivecs file of result ids (-1 pads short rows)")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("ground-truth", help="exact top-k by exhaustive scan")
    p.add_argument("--data", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--format", choices=["fvecs", "csr"], default="fvecs")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--measure", choices=["l2", "ip"], default="l2")
    p.add_argument("--output", required=True, help="ivecs file to write")
    p.set_defaults(func=cmd_ground_truth)

    p = sub.add_parser("bench", help="recall/QPS sweep against ground truth")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--ground-truth", required=True, help="ivecs file")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--ef-list", required=True,
                   help="comma-separated ascending ef values")
    p.add_argument("--csv", required=True, help="output CSV path")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return _EXIT_FORMAT
    except (ValueError, FileNotFoundError, IsADirectoryError,
            PermissionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return _EXIT_USAGE
    except RuntimeError as e:
        print(f"error: {e}", file=sys.stderr)
        return _EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
