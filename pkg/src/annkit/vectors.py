"""Dense and sparse vectors, similarity measures, and exact scoring kernels.

Dense vectors are plain 1-D float32 numpy arrays. Sparse vectors pair sorted
uint32 component indices with float32 values. Both are scored through
`score`, with ranking direction encoded by `better` so inner-product scores
stay human-readable similarities instead of negated pseudo-distances.

All kernels accumulate in float32, matching the storage precision.
"""

from __future__ import annotations

import enum

import numpy as np

from . import _kernels
from .errors import UnsupportedCombinationError


class Measure(enum.Enum):
    """Similarity/distance measure. Squared L2 ranks ascending (smaller is
    closer); inner product ranks descending (larger is closer)."""

    SQUARED_L2 = "l2"
    INNER_PRODUCT = "ip"

    @property
    def sign(self) -> float:
        """Multiplier mapping raw scores into a smaller-is-better key."""
        return 1.0 if self is Measure.SQUARED_L2 else -1.0


def as_dense(v, dim: int | None = None) -> np.ndarray:
    """Validate and return *v* as a contiguous 1-D float32 array.

    Raises ValueError for wrong rank, wrong length, or non-finite entries.
    """
    arr = np.ascontiguousarray(v, dtype=np.float32)
    if arr.ndim != 1:
        raise ValueError(f"dense vector must be 1-D, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"expected dimensionality {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("dense vector contains NaN or Inf")
    return arr


class SparseVector:
    """A sparse vector as parallel (indices, values) arrays.

    Indices are strictly increasing uint32 component positions; values are
    finite, nonzero float32.
    """

    __slots__ = ("indices", "values")

    def __init__(self, indices, values):
        idx = np.ascontiguousarray(indices, dtype=np.uint32)
        val = np.ascontiguousarray(values, dtype=np.float32)
        if idx.ndim != 1 or val.ndim != 1:
            raise ValueError("indices and values must be 1-D")
        if idx.shape[0] != val.shape[0]:
            raise ValueError(
                f"indices ({idx.shape[0]}) and values ({val.shape[0]}) "
                "must have the same length"
            )
        if idx.shape[0] > 1 and not np.all(idx[1:] > idx[:-1]):
            raise ValueError("indices must be strictly increasing")
        if not np.all(np.isfinite(val)):
            raise ValueError("values contain NaN or Inf")
        if np.any(val == 0.0):
            raise ValueError("values must be nonzero")
        self.indices = idx
        self.values = val

    @property
    def nnz(self) -> int:
        return int(self.indices.shape[0])

    def to_dense(self, dim: int) -> np.ndarray:
        """Expand into a dense float32 array of length *dim*."""
        if self.nnz and int(self.indices[-1]) >= dim:
            raise ValueError(f"index {self.indices[-1]} out of range for dim {dim}")
        out = np.zeros(dim, dtype=np.float32)
        out[self.indices] = self.values
        return out

    def __repr__(self) -> str:
        return f"SparseVector(nnz={self.nnz})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return np.array_equal(self.indices, other.indices) and np.array_equal(
            self.values, other.values
        )


def dot_dense(a, b) -> float:
    """Inner product of two dense vectors of equal length."""
    a = as_dense(a)
    b = as_dense(b)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(_kernels.dot_f32(a, b))


def squared_l2(a, b) -> float:
    """Squared Euclidean distance between two dense vectors."""
    a = as_dense(a)
    b = as_dense(b)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(_kernels.sqeuclidean_f32(a, b))


def dot_sparse(a: SparseVector, b: SparseVector) -> float:
    """Inner product over the shared support of two sparse vectors."""
    if not isinstance(a, SparseVector) or not isinstance(b, SparseVector):
        raise ValueError("dot_sparse expects SparseVector operands")
    return float(
        _kernels.sparse_dot_f32(a.indices, a.values, b.indices, b.values)
    )


def score(measure: Measure, a, b) -> float:
    """Score a pair of same-kind vectors under *measure*.

    Callers must compare scores only through `better`, which encodes the
    measure's orientation.
    """
    a_sparse = isinstance(a, SparseVector)
    b_sparse = isinstance(b, SparseVector)
    if a_sparse != b_sparse:
        raise ValueError("cannot score a dense vector against a sparse one")
    if a_sparse:
        if measure is Measure.SQUARED_L2:
            raise UnsupportedCombinationError(
                "squared L2 over sparse vectors is not supported"
            )
        return dot_sparse(a, b)
    if measure is Measure.SQUARED_L2:
        return squared_l2(a, b)
    return dot_dense(a, b)


def better(measure: Measure, s1: float, s2: float) -> bool:
    """True when score *s1* ranks strictly closer than *s2* under *measure*."""
    if measure is Measure.SQUARED_L2:
        return s1 < s2
    return s1 > s2
