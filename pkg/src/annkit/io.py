"""Binary vector-file formats: fvecs/ivecs records and CSR sparse matrices.

fvecs/ivecs: each record is a little-endian signed 32-bit dimension d
followed by d little-endian payload entries (float32 / int32); every record
in a file must share one d.

Sparse CSR: a header of three little-endian unsigned 64-bit integers
(nrows, ncols, nnz), then nrows+1 u64 row offsets, then nnz int32 column
indices, then nnz float32 values. Rows whose indices are not strictly
increasing are repaired on load (stable sort, first occurrence wins on
duplicates); explicitly stored zeros are dropped. Repairs are counted, not
fatal. Structural damage (truncation, bad offsets, out-of-range indices,
non-finite values) raises FormatError with the failing byte offset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError
from .vectors import SparseVector

_CSR_HEADER_BYTES = 24


def _read_records(path, payload_dtype: str) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) == 0:
        raise FormatError("empty file", offset=0)
    if len(data) < 4:
        raise FormatError("truncated dimension prefix", offset=0)
    d = int(np.frombuffer(data[:4], dtype="<i4")[0])
    if d <= 0:
        raise FormatError(f"non-positive dimensionality {d}", offset=0)
    rec = 4 + 4 * d
    n, rem = divmod(len(data), rec)
    if rem:
        raise FormatError("truncated record", offset=n * rec)
    dims = np.frombuffer(data, dtype="<i4").reshape(n, 1 + d)[:, 0]
    bad = np.nonzero(dims != d)[0]
    if bad.size:
        i = int(bad[0])
        raise FormatError(
            f"record {i} has dimensionality {int(dims[i])}, expected {d}",
            offset=i * rec,
        )
    payload = np.frombuffer(data, dtype=payload_dtype).reshape(n, 1 + d)[:, 1:]
    return np.ascontiguousarray(payload)


def read_fvecs(path) -> np.ndarray:
    """Read an fvecs file into an (n, d) float32 matrix."""
    return _read_records(path, "<f4").astype(np.float32, copy=False)


def read_ivecs(path) -> np.ndarray:
    """Read an ivecs file into an (n, d) int32 matrix."""
    return _read_records(path, "<i4").astype(np.int32, copy=False)


def _write_records(path, mat, payload_dtype: str) -> None:
    mat = np.asarray(mat)
    if mat.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {mat.shape}")
    n, d = mat.shape
    if n == 0 or d == 0:
        raise ValueError("refusing to write a file with no records")
    out = np.empty((n, 1 + d), dtype="<i4")
    out[:, 0] = d
    out[:, 1:] = mat.astype(payload_dtype).view("<i4")
    with open(path, "wb") as f:
        f.write(out.tobytes())


def write_fvecs(path, mat) -> None:
    """Write an (n, d) float32 matrix as fvecs records."""
    _write_records(path, mat, "<f4")


def write_ivecs(path, mat) -> None:
    """Write an (n, d) int32 matrix as ivecs records."""
    _write_records(path, mat, "<i4")


@dataclass
class CsrMatrix:
    """A sparse matrix read from disk, rows exposable as SparseVector.

    repaired_rows counts rows that needed sorting, deduplication, or
    stored-zero removal on load.
    """

    nrows: int
    ncols: int
    offsets: np.ndarray  # (nrows+1,) int64
    indices: np.ndarray  # (nnz,) uint32
    values: np.ndarray  # (nnz,) float32
    repaired_rows: int = 0

    @property
    def nnz(self) -> int:
        return int(self.offsets[-1])

    def row(self, i: int) -> SparseVector:
        if not 0 <= i < self.nrows:
            raise IndexError(f"row {i} out of range [0, {self.nrows})")
        lo = self.offsets[i]
        hi = self.offsets[i + 1]
        return SparseVector(self.indices[lo:hi], self.values[lo:hi])

    def rows(self):
        """Iterate all rows as SparseVector."""
        for i in range(self.nrows):
            yield self.row(i)


def read_sparse_csr(path) -> CsrMatrix:
    """Read a binary CSR file, validating structure and repairing rows."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _CSR_HEADER_BYTES:
        raise FormatError("truncated header", offset=0)
    nrows, ncols, nnz = np.frombuffer(data[:_CSR_HEADER_BYTES], dtype="<u8")
    nrows, ncols, nnz = int(nrows), int(ncols), int(nnz)

    pos = _CSR_HEADER_BYTES
    need = 8 * (nrows + 1)
    if len(data) < pos + need:
        raise FormatError("truncated row offsets", offset=pos)
    offsets = np.frombuffer(data, dtype="<u8", count=nrows + 1, offset=pos)
    if offsets[0] != 0:
        raise FormatError(f"offsets[0] = {int(offsets[0])}, expected 0", offset=pos)
    diffs = np.diff(offsets.astype(np.int64))
    bad = np.nonzero(diffs < 0)[0]
    if bad.size:
        i = int(bad[0])
        raise FormatError(f"offsets decrease at row {i}", offset=pos + 8 * (i + 1))
    if int(offsets[-1]) != nnz:
        raise FormatError(
            f"offsets end at {int(offsets[-1])} but header declares nnz={nnz}",
            offset=pos + 8 * nrows,
        )
    pos += need

    if len(data) < pos + 4 * nnz:
        raise FormatError("truncated column indices", offset=pos)
    raw_idx = np.frombuffer(data, dtype="<i4", count=nnz, offset=pos)
    bad = np.nonzero((raw_idx < 0) | (raw_idx.astype(np.int64) >= ncols))[0]
    if bad.size:
        i = int(bad[0])
        raise FormatError(
            f"column index {int(raw_idx[i])} out of range [0, {ncols})",
            offset=pos + 4 * i,
        )
    idx_pos = pos
    pos += 4 * nnz

    if len(data) < pos + 4 * nnz:
        raise FormatError("truncated values", offset=pos)
    raw_val = np.frombuffer(data, dtype="<f4", count=nnz, offset=pos)
    bad = np.nonzero(~np.isfinite(raw_val))[0]
    if bad.size:
        i = int(bad[0])
        raise FormatError(f"non-finite value at entry {i}", offset=pos + 4 * i)
    if len(data) > pos + 4 * nnz:
        raise FormatError(
            f"{len(data) - pos - 4 * nnz} trailing bytes", offset=pos + 4 * nnz
        )

    indices = raw_idx.astype(np.uint32)
    values = raw_val.astype(np.float32)
    offsets = offsets.astype(np.int64)

    # Identify rows needing repair: indices not strictly increasing or
    # explicitly stored zero values.
    starts = offsets[:-1]
    ends = offsets[1:]
    needs = np.zeros(nrows, dtype=bool)
    if nnz:
        inner = np.ones(nnz, dtype=bool)
        inner[starts[starts < nnz]] = False
        nondecr = np.empty(nnz, dtype=bool)
        nondecr[0] = False
        nondecr[1:] = indices[1:] <= indices[:-1]
        bad_pos = np.nonzero(nondecr & inner)[0]
        if bad_pos.size:
            rows_of = np.searchsorted(ends, bad_pos, side="right")
            needs[rows_of] = True
        zero_pos = np.nonzero(values == 0.0)[0]
        if zero_pos.size:
            rows_of = np.searchsorted(ends, zero_pos, side="right")
            needs[rows_of] = True

    repaired = int(np.count_nonzero(needs))
    if repaired == 0:
        return CsrMatrix(nrows, ncols, offsets, indices, values, 0)

    new_idx_parts = []
    new_val_parts = []
    new_offsets = np.zeros(nrows + 1, dtype=np.int64)
    total = 0
    for i in range(nrows):
        lo, hi = int(starts[i]), int(ends[i])
        ri = indices[lo:hi]
        rv = values[lo:hi]
        if needs[i]:
            order = np.argsort(ri, kind="stable")
            ri = ri[order]
            rv = rv[order]
            keep = np.ones(ri.shape[0], dtype=bool)
            keep[1:] = ri[1:] != ri[:-1]  # first occurrence wins
            keep &= rv != 0.0
            ri = ri[keep]
            rv = rv[keep]
        new_idx_parts.append(ri)
        new_val_parts.append(rv)
        total += ri.shape[0]
        new_offsets[i + 1] = total
    indices = np.concatenate(new_idx_parts) if total else np.empty(0, np.uint32)
    values = np.concatenate(new_val_parts) if total else np.empty(0, np.float32)
    return CsrMatrix(nrows, ncols, new_offsets,
                     indices.astype(np.uint32), values.astype(np.float32),
                     repaired)


def write_sparse_csr(path, rows, ncols: int) -> None:
    """Write SparseVector rows (or a CsrMatrix) as a binary CSR file."""
    if isinstance(rows, CsrMatrix):
        ncols = rows.ncols
        offsets = rows.offsets.astype(np.int64)
        indices = rows.indices
        values = rows.values
        nrows = rows.nrows
    else:
        rows = list(rows)
        nrows = len(rows)
        offsets = np.zeros(nrows + 1, dtype=np.int64)
        for i, v in enumerate(rows):
            if not isinstance(v, SparseVector):
                raise ValueError("rows must be SparseVector instances")
            offsets[i + 1] = offsets[i] + v.nnz
        indices = (
            np.concatenate([v.indices for v in rows])
            if nrows and offsets[-1]
            else np.empty(0, np.uint32)
        )
        values = (
            np.concatenate([v.values for v in rows])
            if nrows and offsets[-1]
            else np.empty(0, np.float32)
        )
    if ncols < 1:
        raise ValueError(f"ncols must be >= 1, got {ncols}")
    if indices.size and int(indices.max()) >= ncols:
        raise ValueError(f"column index {int(indices.max())} >= ncols {ncols}")
    if indices.size and int(indices.max()) >= 2**31:
        raise ValueError("column index exceeds the signed 32-bit file format")
    nnz = int(offsets[-1])
    with open(path, "wb") as f:
        f.write(np.array([nrows, ncols, nnz], dtype="<u8").tobytes())
        f.write(offsets.astype("<u8").tobytes())
        f.write(indices.astype("<i4").tobytes())
        f.write(values.astype("<f4").tobytes())
