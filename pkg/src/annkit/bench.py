"""Recall/throughput benchmarking: ground truth, recall@k, and ef sweeps.

The sweep protocol: for each beam width ef, one untimed warm-up pass over all
queries, then one timed single-thread sequential pass. Recall is measured
against brute-force ground truth; throughput is wall-clock queries per
second around the whole timed loop. Results go to a CSV (one header row,
`ef,k,recall,qps,mean_latency_us`) and a recall-vs-QPS figure rendered next
to it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from . import _kernels
from .quantizer import IdentityQuantizer
from .query_eval import make_evaluator
from .vectors import Measure

CSV_HEADER = "ef,k,recall,qps,mean_latency_us"


@dataclass
class BenchmarkRecord:
    """One sweep point: search quality and throughput at a fixed ef."""

    ef: int
    k: int
    recall_at_k: float
    qps: float
    mean_latency_us: float

    def __post_init__(self):
        if not 0.0 <= self.recall_at_k <= 1.0:
            raise ValueError(f"recall must be in [0, 1], got {self.recall_at_k}")
        if self.qps <= 0.0:
            raise ValueError(f"qps must be positive, got {self.qps}")


def _keyed_top_ids(keys: np.ndarray, k: int) -> np.ndarray:
    """Ids of the k smallest (key, id) pairs, ascending, from a full scan."""
    n = keys.shape[0]
    kk = min(k, n)
    if kk == n:
        cand = np.arange(n)
    else:
        part = np.argpartition(keys, kk - 1)[:kk]
        kth = keys[part].max()
        cand = np.nonzero(keys <= kth)[0]
    order = np.lexsort((cand, keys[cand]))
    return cand[order[:kk]].astype(np.int32)


def compute_ground_truth(ds, queries, k: int, measure: Measure) -> np.ndarray:
    """Exhaustive exact top-k ids for every query, shape (nq, min(k, n)).

    Requires an Identity (exact) dataset; ties resolve by ascending id, the
    same rule the index uses.
    """
    if not isinstance(ds.quantizer, IdentityQuantizer):
        raise ValueError("ground truth requires an unquantized dataset")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if ds.n < 1:
        raise ValueError("dataset is empty")
    queries = list(queries) if not isinstance(queries, np.ndarray) else queries
    nq = len(queries)
    if nq == 0:
        raise ValueError("no queries")
    kk = min(k, ds.n)
    out = np.empty((nq, kk), dtype=np.int32)
    keys = np.empty(ds.n, dtype=np.float32)
    sign = np.float32(measure.sign)
    for i in range(nq):
        args = make_evaluator(queries[i], ds, measure).kernel_args()
        _kernels.scan_keyed(args[0], sign, *args[1:], ds.n, keys)
        out[i] = _keyed_top_ids(keys, kk)
    return out


def recall_at_k(retrieved, truth, k: int) -> float:
    """Fraction of the true top-k present in the retrieved top-k.

    Accepts one pair of id lists, or two batches with one row per query
    (mean of the per-query fractions).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")

    def single(r, t) -> float:
        r = np.asarray(r).ravel()
        t = np.asarray(t).ravel()
        if r.shape[0] < k or t.shape[0] < k:
            raise ValueError(
                f"both id lists must have length >= k={k}, got "
                f"{r.shape[0]} and {t.shape[0]}"
            )
        return np.intersect1d(r[:k], t[:k]).shape[0] / k

    if len(retrieved) == 0 or len(truth) == 0:
        raise ValueError("empty id lists")
    if np.ndim(retrieved[0]) == 0 and np.ndim(truth[0]) == 0:
        return single(retrieved, truth)
    if len(retrieved) != len(truth):
        raise ValueError(
            f"{len(retrieved)} retrieved rows vs {len(truth)} truth rows"
        )
    return float(np.mean([single(r, t) for r, t in zip(retrieved, truth)]))


def bench_sweep(index, queries, truth: np.ndarray, k: int,
                ef_list) -> list[BenchmarkRecord]:
    """Run the timed recall/QPS sweep over ascending ef values.

    Every ef is validated (>= k, strictly ascending) before any timing
    starts. Searches run sequentially on the calling thread.
    """
    ef_list = [int(e) for e in ef_list]
    if not ef_list:
        raise ValueError("ef_list is empty")
    for a, b in zip(ef_list, ef_list[1:]):
        if b <= a:
            raise ValueError(f"ef_list must be strictly ascending, got {ef_list}")
    for ef in ef_list:
        if ef < k:
            raise ValueError(f"every ef must be >= k={k}; got ef={ef}")
    if isinstance(queries, np.ndarray):
        queries = list(queries)
    nq = len(queries)
    truth = np.asarray(truth)
    if truth.ndim != 2 or truth.shape[0] != nq:
        raise ValueError(
            f"ground truth shape {truth.shape} does not cover {nq} queries"
        )
    if truth.shape[1] < k:
        raise ValueError(f"ground truth has fewer than k={k} columns")

    records = []
    for ef in ef_list:
        for q in queries:  # warm-up, untimed
            index.search(q, k, ef)
        retrieved = []
        t0 = time.perf_counter()
        for q in queries:
            retrieved.append(index.search(q, k, ef).ids())
        elapsed = time.perf_counter() - t0
        recall = float(
            np.mean([recall_at_k(r, t, k) for r, t in zip(retrieved, truth)])
        )
        records.append(BenchmarkRecord(
            ef=ef,
            k=k,
            recall_at_k=recall,
            qps=nq / elapsed,
            mean_latency_us=elapsed / nq * 1e6,
        ))
    return records


def write_benchmark_csv(records, path) -> None:
    """Write sweep records as CSV with the standard header row."""
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            f"{r.ef},{r.k},{r.recall_at_k!r},{r.qps:.3f},{r.mean_latency_us:.3f}"
        )
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_benchmark_csv(path) -> list[BenchmarkRecord]:
    """Read records written by write_benchmark_csv."""
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"unexpected CSV header in {path}")
    records = []
    for ln in lines[1:]:
        ef, k, recall, qps, lat = ln.split(",")
        records.append(BenchmarkRecord(
            ef=int(ef), k=int(k), recall_at_k=float(recall),
            qps=float(qps), mean_latency_us=float(lat),
        ))
    return records


def render_benchmark_figure(records, path) -> None:
    """Render the recall-vs-QPS curve for one sweep to an image file."""
    if not records:
        raise ValueError("no records to plot")
    recalls = [r.recall_at_k for r in records]
    qps = [r.qps for r in records]
    k = records[0].k
    fig = Figure(figsize=(6.0, 4.0))
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    ax.plot(recalls, qps, marker="o", color="tab:blue")
    for r in records:
        ax.annotate(f"ef={r.ef}", (r.recall_at_k, r.qps),
                    textcoords="offset points", xytext=(5, 5), fontsize=8)
    ax.set_xlabel(f"recall@{k}")
    ax.set_ylabel("queries per second")
    ax.set_title("Accuracy vs. throughput")
    ax.grid(True, alpha=0.3)
    fig.savefig(path, dpi=150, bbox_inches="tight")
