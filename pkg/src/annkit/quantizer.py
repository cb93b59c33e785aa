"""Vector quantizers: identity (exact float32) and product quantization.

A product quantizer splits a d-dimensional vector into m contiguous
subvectors of length dsub = d/m and replaces each with the index of its
nearest centroid among ks learned per-subspace centroids, so one vector
becomes m single-byte codes. Queries against quantized data go through a
per-query distance table (asymmetric scoring): table[j][c] holds the partial
score between the query's j-th subvector and centroid c, and scoring a code
is m table lookups.

Training runs Lloyd's k-means independently per subspace in float64 (the
recorded objective must be non-increasing, which float32 updates would not
reliably preserve); the emitted codebook is float32.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .vectors import Measure, as_dense

# Encoding processes this many vectors at a time; bounds the float64
# difference tensor to ~270MB at ks=256, dsub=128.
_ENCODE_CHUNK = 8192


class IdentityQuantizer:
    """No-op quantizer: the encoded form is the input, bit for bit."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "IdentityQuantizer()"

    def __eq__(self, other) -> bool:
        return isinstance(other, IdentityQuantizer)


class PQCodebook:
    """Trained product-quantizer centroids, shape (m, ks, dsub) float32.

    Immutable once built. `objective_history`, when set by `train_pq`, holds
    one tuple per subspace of the per-iteration mean squared reconstruction
    error over the training sample; it is diagnostic state and is not
    serialized or compared.
    """

    __slots__ = ("centroids", "objective_history")

    def __init__(self, centroids):
        arr = np.ascontiguousarray(centroids, dtype=np.float32)
        if arr.ndim != 3:
            raise ValueError(f"centroids must be (m, ks, dsub), got {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"centroids have a zero-length axis: {arr.shape}")
        if arr.shape[1] > 256:
            raise ValueError(
                f"ks = {arr.shape[1]} exceeds 256, the single-byte code limit"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("centroids contain NaN or Inf")
        self.centroids = arr
        self.objective_history: tuple[tuple[float, ...], ...] | None = None

    @property
    def m(self) -> int:
        return self.centroids.shape[0]

    @property
    def ks(self) -> int:
        return self.centroids.shape[1]

    @property
    def dsub(self) -> int:
        return self.centroids.shape[2]

    @property
    def d(self) -> int:
        return self.m * self.dsub

    def __repr__(self) -> str:
        return f"PQCodebook(m={self.m}, ks={self.ks}, dsub={self.dsub})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, PQCodebook):
            return NotImplemented
        return np.array_equal(self.centroids, other.centroids)


class ProductQuantizer:
    """A PQ quantizer bound to one trained codebook."""

    __slots__ = ("codebook",)

    def __init__(self, codebook: PQCodebook):
        if not isinstance(codebook, PQCodebook):
            raise ValueError("ProductQuantizer requires a PQCodebook")
        self.codebook = codebook

    def __repr__(self) -> str:
        return f"ProductQuantizer({self.codebook!r})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProductQuantizer):
            return NotImplemented
        return self.codebook == other.codebook


def _as_sample_matrix(sample, m: int) -> np.ndarray:
    """Stack a training sample into an (n, d) float32 matrix."""
    if isinstance(sample, np.ndarray) and sample.ndim == 2:
        mat = np.ascontiguousarray(sample, dtype=np.float32)
    else:
        rows = [as_dense(v) for v in sample]
        if not rows:
            raise ValueError("training sample is empty")
        mat = np.stack(rows)
    if mat.shape[0] == 0:
        raise ValueError("training sample is empty")
    if not np.all(np.isfinite(mat)):
        raise ValueError("training sample contains NaN or Inf")
    d = mat.shape[1]
    if d % m != 0:
        raise ValueError(f"dimensionality {d} is not divisible by m={m}")
    return mat


def train_pq(sample, m: int, ks: int, iters: int = 25, seed: int = 0) -> PQCodebook:
    """Train a product quantizer with per-subspace Lloyd's k-means.

    Initialization draws ks distinct sample rows uniformly (seeded per
    subspace). Iteration stops after `iters` rounds or as soon as an
    assignment pass changes nothing. A centroid left with no assigned points
    is reseeded to the sample point farthest from its own current centroid.

    Args:
        sample: training vectors, an (n, d) array or an iterable of 1-D
            float32 vectors; d must be divisible by m.
        m: number of subspaces.
        ks: centroids per subspace, at most 256 and at most n.
        iters: maximum k-means iterations per subspace.
        seed: base RNG seed; subspace j uses seed + j.

    Returns:
        A PQCodebook with `objective_history` populated.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if not 1 <= ks <= 256:
        raise ValueError(f"ks must be in [1, 256], got {ks}")
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    mat = _as_sample_matrix(sample, m)
    n = mat.shape[0]
    if ks > n:
        raise ValueError(f"ks={ks} exceeds the training sample size {n}")
    dsub = mat.shape[1] // m

    centroids = np.empty((m, ks, dsub), dtype=np.float32)
    history = []
    for j in range(m):
        sub = mat[:, j * dsub : (j + 1) * dsub].astype(np.float64)
        cent, errs = _kmeans_subspace(sub, ks, iters, seed + j)
        centroids[j] = cent.astype(np.float32)
        history.append(tuple(errs))

    cb = PQCodebook(centroids)
    cb.objective_history = tuple(history)
    return cb


def _kmeans_subspace(sub: np.ndarray, ks: int, iters: int, seed: int):
    """Lloyd's k-means on one float64 subspace matrix.

    Returns (centroids (ks, dsub) float64, per-iteration mean squared error).
    The error for an iteration is measured after its assignment pass, so the
    sequence is non-increasing: centroid updates lower within-cluster error
    and the next assignment can only lower it further.
    """
    n = sub.shape[0]
    rng = np.random.default_rng(seed)
    cent = sub[rng.choice(n, size=ks, replace=False)].copy()

    errs = []
    prev_assign = None
    for _ in range(iters):
        diff = sub[:, None, :] - cent[None, :, :]
        dist = np.einsum("nkd,nkd->nk", diff, diff)
        assign = np.argmin(dist, axis=1)
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        errs.append(float(np.mean(dist[np.arange(n), assign])))
        prev_assign = assign

        for c in range(ks):
            members = assign == c
            if members.any():
                cent[c] = sub[members].mean(axis=0)
            else:
                # Empty cluster: reseed at the point worst served right now.
                worst = int(np.argmax(dist[np.arange(n), assign]))
                cent[c] = sub[worst]
                assign[worst] = c
    return cent, errs


def encode(v, cb: PQCodebook) -> np.ndarray:
    """Encode one dense vector into m uint8 centroid indices.

    codes[j] is the index of the squared-L2-nearest centroid to the j-th
    subvector; exact ties resolve to the lowest index.
    """
    arr = as_dense(v, cb.d)
    return encode_batch(arr[None, :], cb)[0]


def encode_batch(mat, cb: PQCodebook) -> np.ndarray:
    """Encode an (n, d) float32 matrix into (n, m) uint8 codes.

    Same arithmetic as `encode` row by row: float64 per-subspace distances,
    argmin with lowest-index tie-breaking.
    """
    mat = np.ascontiguousarray(mat, dtype=np.float32)
    if mat.ndim != 2 or mat.shape[1] != cb.d:
        raise ValueError(f"expected (n, {cb.d}) matrix, got shape {mat.shape}")
    n = mat.shape[0]
    codes = np.empty((n, cb.m), dtype=np.uint8)
    cent64 = cb.centroids.astype(np.float64)
    for start in range(0, n, _ENCODE_CHUNK):
        chunk = mat[start : start + _ENCODE_CHUNK].astype(np.float64)
        for j in range(cb.m):
            sub = chunk[:, j * cb.dsub : (j + 1) * cb.dsub]
            diff = sub[:, None, :] - cent64[j][None, :, :]
            dist = np.einsum("nkd,nkd->nk", diff, diff)
            codes[start : start + chunk.shape[0], j] = np.argmin(dist, axis=1)
    return codes


def decode(code, cb: PQCodebook) -> np.ndarray:
    """Reconstruct the float32 vector a code stands for: the concatenation
    of its m selected centroids."""
    code = np.asarray(code, dtype=np.int64).ravel()
    if code.shape[0] != cb.m:
        raise ValueError(f"code length {code.shape[0]} != m={cb.m}")
    if np.any(code < 0) or np.any(code >= cb.ks):
        raise ValueError(f"code entry out of range [0, {cb.ks})")
    return cb.centroids[np.arange(cb.m), code].reshape(-1).copy()


def build_distance_table(q, cb: PQCodebook, measure: Measure) -> np.ndarray:
    """Per-query (m, ks) float32 partial-score table.

    Under squared L2, entry [j][c] is the squared distance between the
    query's j-th subvector and centroid c; under inner product it is their
    dot product. Summing entries along a code gives that code's full score.
    """
    arr = as_dense(q, cb.d)
    qsub = arr.reshape(cb.m, 1, cb.dsub)
    if measure is Measure.SQUARED_L2:
        diff = qsub - cb.centroids
        return np.einsum("mkd,mkd->mk", diff, diff).astype(np.float32)
    return np.einsum("mkd,mkd->mk", np.broadcast_to(qsub, cb.centroids.shape),
                     cb.centroids).astype(np.float32)


def adc_score(code, table) -> float:
    """Score one code against a distance table: sum of m table lookups."""
    code = np.ascontiguousarray(code, dtype=np.uint8)
    table = np.ascontiguousarray(table, dtype=np.float32)
    if code.ndim != 1 or table.ndim != 2 or code.shape[0] != table.shape[0]:
        raise ValueError(
            f"code shape {code.shape} does not match table shape {table.shape}"
        )
    if np.any(code >= table.shape[1]):
        raise ValueError(f"code entry out of range [0, {table.shape[1]})")
    return float(_kernels.adc_f32(table, code))
