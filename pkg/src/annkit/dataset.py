"""Datasets: id-addressed vector collections bound to one quantizer.

A dataset hides vector kind and representation behind integer ids so the
graph index never branches on either. Ids are dense, insertion-ordered
integers starting at 0, and storage is append-only.

Product-quantized datasets keep the original float32 rows in a raw cache
while the graph is under construction (the graph is built on original
representations; only queries score against codes). `drop_raw_cache`
releases that memory once construction is done.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .quantizer import (
    IdentityQuantizer,
    ProductQuantizer,
    encode_batch,
)
from .vectors import Measure, SparseVector, as_dense


def _grow_rows(arr: np.ndarray, need: int) -> np.ndarray:
    """Return *arr* with capacity along axis 0 of at least *need* rows."""
    cap = arr.shape[0]
    if need <= cap:
        return arr
    new_cap = max(need, cap * 2, 16)
    out = np.empty((new_cap,) + arr.shape[1:], dtype=arr.dtype)
    out[:cap] = arr
    return out


class DenseDataset:
    """Append-only collection of dense float32 vectors of one dimensionality.

    With an IdentityQuantizer the stored payload is the vector itself. With a
    ProductQuantizer the payload is the (m,) uint8 code; originals live in
    the raw cache until dropped.
    """

    kind = "dense"

    def __init__(self, dim: int, quantizer=None, keep_raw: bool = True):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if quantizer is None:
            quantizer = IdentityQuantizer()
        if not isinstance(quantizer, (IdentityQuantizer, ProductQuantizer)):
            raise ValueError(f"unsupported quantizer: {quantizer!r}")
        if isinstance(quantizer, ProductQuantizer) and quantizer.codebook.d != dim:
            raise ValueError(
                f"codebook covers {quantizer.codebook.d} dims, dataset has {dim}"
            )
        self.dim = dim
        self.quantizer = quantizer
        self.n = 0
        self._is_pq = isinstance(quantizer, ProductQuantizer)
        if self._is_pq:
            self._codes = np.empty((0, quantizer.codebook.m), dtype=np.uint8)
            self._raw = np.empty((0, dim), dtype=np.float32) if keep_raw else None
        else:
            self._codes = None
            self._raw = np.empty((0, dim), dtype=np.float32)

    @property
    def has_raw(self) -> bool:
        return self._raw is not None

    def __len__(self) -> int:
        return self.n

    def push(self, v) -> int:
        """Store one vector; returns its id."""
        return self.push_batch(as_dense(v, self.dim)[None, :])

    def push_batch(self, mat) -> int:
        """Store the rows of an (n, dim) float32 matrix; returns the last id."""
        if self._is_pq and self._raw is None:
            # New rows would leave the raw cache out of step with the codes
            # and any later graph construction would score stale views.
            raise RuntimeError("cannot push after the raw cache was dropped")
        mat = np.ascontiguousarray(mat, dtype=np.float32)
        if mat.ndim != 2 or mat.shape[1] != self.dim:
            raise ValueError(f"expected (n, {self.dim}) matrix, got {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise ValueError("vectors contain NaN or Inf")
        add = mat.shape[0]
        if add == 0:
            raise ValueError("push_batch requires at least one row")
        new_n = self.n + add
        if self._is_pq:
            self._codes = _grow_rows(self._codes, new_n)
            self._codes[self.n : new_n] = encode_batch(mat, self.quantizer.codebook)
            if self._raw is not None:
                self._raw = _grow_rows(self._raw, new_n)
                self._raw[self.n : new_n] = mat
        else:
            self._raw = _grow_rows(self._raw, new_n)
            self._raw[self.n : new_n] = mat
        self.n = new_n
        return new_n - 1

    def _check_id(self, ident: int) -> int:
        ident = int(ident)
        if not 0 <= ident < self.n:
            raise IndexError(f"id {ident} out of range [0, {self.n})")
        return ident

    def get(self, ident: int) -> np.ndarray:
        """Stored payload view: the float32 row (Identity) or uint8 code (PQ)."""
        ident = self._check_id(ident)
        if self._is_pq:
            return self._codes[ident]
        return self._raw[ident]

    def get_raw(self, ident: int) -> np.ndarray:
        """Original float32 row; requires the raw cache to still be present."""
        ident = self._check_id(ident)
        if self._raw is None:
            raise RuntimeError("raw cache was dropped")
        return self._raw[ident]

    def drop_raw_cache(self) -> None:
        """Release construction-time originals. No-op for Identity datasets
        (raw is the storage) and when already dropped."""
        if self._is_pq:
            self._raw = None

    # Contiguous views for the compiled kernels.

    def payload_matrix(self) -> np.ndarray:
        """(n, ·) view of the stored payloads."""
        if self._is_pq:
            return self._codes[: self.n]
        return self._raw[: self.n]

    def raw_matrix(self) -> np.ndarray:
        """(n, dim) view of original vectors; state error after drop."""
        if self._raw is None:
            raise RuntimeError("raw cache was dropped")
        return self._raw[: self.n]


class SparseDataset:
    """Append-only collection of sparse vectors in CSR-style flat storage.

    Sparse data is always stored exactly (IdentityQuantizer only).
    """

    kind = "sparse"

    def __init__(self):
        self.quantizer = IdentityQuantizer()
        self.n = 0
        self._offsets = np.zeros(1, dtype=np.int64)
        self._indices = np.empty(0, dtype=np.uint32)
        self._values = np.empty(0, dtype=np.float32)
        self._nnz = 0

    @property
    def has_raw(self) -> bool:
        return True

    def __len__(self) -> int:
        return self.n

    def push(self, v: SparseVector) -> int:
        """Store one sparse vector; returns its id."""
        if not isinstance(v, SparseVector):
            raise TypeError("SparseDataset.push expects a SparseVector")
        new_n = self.n + 1
        new_nnz = self._nnz + v.nnz
        self._offsets = _grow_rows(self._offsets, new_n + 1)
        self._indices = _grow_rows(self._indices, new_nnz)
        self._values = _grow_rows(self._values, new_nnz)
        self._indices[self._nnz : new_nnz] = v.indices
        self._values[self._nnz : new_nnz] = v.values
        self._offsets[new_n] = new_nnz
        self.n = new_n
        self._nnz = new_nnz
        return new_n - 1

    def _check_id(self, ident: int) -> int:
        ident = int(ident)
        if not 0 <= ident < self.n:
            raise IndexError(f"id {ident} out of range [0, {self.n})")
        return ident

    def get(self, ident: int) -> SparseVector:
        """The stored vector, reconstructed over storage views."""
        ident = self._check_id(ident)
        lo = self._offsets[ident]
        hi = self._offsets[ident + 1]
        return SparseVector(self._indices[lo:hi], self._values[lo:hi])

    def get_raw(self, ident: int) -> SparseVector:
        return self.get(ident)

    def drop_raw_cache(self) -> None:
        pass

    def csr_views(self):
        """(offsets, indices, values) contiguous views for the kernels."""
        return (
            self._offsets[: self.n + 1],
            self._indices[: self._nnz],
            self._values[: self._nnz],
        )

    @property
    def total_nnz(self) -> int:
        return self._nnz


def dataset_construction_args(ds, measure):
    """Kernel arguments for construction-time scoring of stored element
    pairs on their original representations.

    Returns (pair_mode, vectors, sp_offs, sp_idx, sp_vals).
    """
    if isinstance(ds, SparseDataset):
        offs, idx, vals = ds.csr_views()
        return (_kernels.MODE_SPARSE_IP, _kernels.EMPTY_F32_2D, offs, idx, vals)
    mode = (
        _kernels.MODE_DENSE_L2
        if measure is Measure.SQUARED_L2
        else _kernels.MODE_DENSE_IP
    )
    return (mode, ds.raw_matrix(), _kernels.EMPTY_I64, _kernels.EMPTY_U32,
            _kernels.EMPTY_F32)
