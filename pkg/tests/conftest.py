"""Shared fixtures: synthetic vector corpora and prebuilt indexes."""

import time

import numpy as np
import pytest

from annkit import (
    DenseDataset,
    HnswConfig,
    HnswIndex,
    Measure,
    ProductQuantizer,
    compute_ground_truth,
    train_pq,
)

RECALL_SCALE_N = 100_000
RECALL_SCALE_NQ = 1_000
PQ_TRAIN_SAMPLE = 20_000


def sift_style(n_base, n_queries, seed):
    """Generate image-descriptor-like vectors: d=128, byte-range values.

    Real descriptor sets are nominally high-dimensional but concentrate on
    a low-dimensional manifold, and their energy is grouped into coordinate
    blocks (one per spatial cell). Both properties matter: the manifold
    keeps graph search navigable and the block locality is what lets
    product quantizers with contiguous subspaces work. This draws points
    from a 16-dimensional latent mixture (64 heavily overlapping
    components), embeds each latent dimension mostly into its own
    8-coordinate block with mild leakage elsewhere, applies a decaying
    spectrum, adds small full-rank jitter, then shifts into byte range,
    floors, and clips. Queries come from the same distribution.

    Args:
        n_base: number of base vectors.
        n_queries: number of query vectors.
        seed: generator seed; same seed gives identical output.

    Returns:
        (base, queries) float32 arrays shaped (n_base, 128), (n_queries, 128).
    """
    d, r, n_centers = 128, 16, 64
    rng = np.random.default_rng(seed)
    basis = np.zeros((d, r))
    for j in range(r):
        block = rng.standard_normal(8)
        block /= np.linalg.norm(block)
        leak = rng.standard_normal(d)
        leak /= np.linalg.norm(leak)
        col = 0.3 * leak
        col[8 * j: 8 * (j + 1)] += np.sqrt(1.0 - 0.3 ** 2) * block
        basis[:, j] = col
    scales = 150.0 * 0.88 ** np.arange(r)
    proj = basis * scales                                   # (d, r)
    centers = 0.9 * rng.standard_normal((n_centers, r))
    n = n_base + n_queries
    which = rng.integers(0, n_centers, size=n)
    z = centers[which] + 0.55 * rng.standard_normal((n, r))
    x = z @ proj.T + 110.0 + 3.0 * rng.standard_normal((n, d))
    x = np.clip(np.floor(x), 0.0, 255.0).astype(np.float32)
    return x[:n_base], x[n_base:]


class RecallBundle:
    """100k-vector corpus with identity and quantized indexes plus truth.

    Built once per session because construction dominates the runtime of
    the recall tests. stage_seconds records wall time per build stage so
    tests can account for shared work in their budgets.
    """

    def __init__(self):
        self.stage_seconds = {}
        t0 = time.perf_counter()
        self.base, self.queries = sift_style(
            RECALL_SCALE_N, RECALL_SCALE_NQ, seed=1234)
        self.stage_seconds["data"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        self.identity_ds = DenseDataset(dim=128)
        self.identity_index = HnswIndex(
            self.identity_ds, Measure.SQUARED_L2,
            HnswConfig(M=16, ef_construction=200, seed=0))
        self.identity_index.add_batch(self.base)
        self.stage_seconds["identity_build"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        self.truth = compute_ground_truth(
            self.identity_ds, self.queries, k=10,
            measure=Measure.SQUARED_L2)
        self.stage_seconds["ground_truth"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        sample_rng = np.random.default_rng(99)
        pick = np.sort(sample_rng.choice(
            RECALL_SCALE_N, size=PQ_TRAIN_SAMPLE, replace=False))
        self.codebook = train_pq(self.base[pick], m=16, ks=256, seed=0)
        self.stage_seconds["pq_train"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        self.pq_ds = DenseDataset(
            dim=128, quantizer=ProductQuantizer(self.codebook))
        self.pq_index = HnswIndex(
            self.pq_ds, Measure.SQUARED_L2,
            HnswConfig(M=16, ef_construction=200, seed=0))
        self.pq_index.add_batch(self.base)
        self.stage_seconds["pq_build"] = time.perf_counter() - t0

    @property
    def build_seconds(self):
        return sum(self.stage_seconds.values())


@pytest.fixture(scope="session")
def recall_bundle():
    return RecallBundle()
