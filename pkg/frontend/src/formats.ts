/**
 * Binary vector-file codecs shared with the annkit CLI.
 *
 * fvecs/ivecs: each record is a little-endian int32 dimension d followed by
 * d little-endian payload entries (float32 / int32); every record in a file
 * must share one d.
 *
 * Sparse CSR: a header of three little-endian uint64 (nrows, ncols, nnz),
 * then nrows+1 uint64 row offsets, then nnz int32 column indices, then nnz
 * float32 values. The encoder only accepts canonical rows (strictly
 * increasing columns, finite nonzero values) so the engine never needs to
 * repair them; the decoder validates structure and returns rows as stored.
 */

import * as fs from "node:fs";

const CSR_HEADER_BYTES = 24;

/** Structural damage in a binary file, located by byte offset. */
export class FormatError extends Error {
  constructor(message: string, readonly offset: number) {
    super(`${message} (byte offset ${offset})`);
    this.name = "FormatError";
  }
}

export interface SparseRow {
  /** Strictly increasing column indices. */
  indices: Int32Array;
  /** Finite nonzero values, one per index. */
  values: Float32Array;
}

export interface CsrData {
  ncols: number;
  rows: SparseRow[];
}

function view(buf: Buffer): DataView {
  return new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
}

function u64(dv: DataView, offset: number, what: string): number {
  const raw = dv.getBigUint64(offset, true);
  if (raw > BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new FormatError(`${what} ${raw} is not addressable`, offset);
  }
  return Number(raw);
}

function decodeRecords(buf: Buffer): { d: number; n: number; dv: DataView } {
  if (buf.byteLength === 0) {
    throw new FormatError("empty file", 0);
  }
  if (buf.byteLength < 4) {
    throw new FormatError("truncated dimension prefix", 0);
  }
  const dv = view(buf);
  const d = dv.getInt32(0, true);
  if (d <= 0) {
    throw new FormatError(`non-positive dimensionality ${d}`, 0);
  }
  const rec = 4 + 4 * d;
  const n = Math.floor(buf.byteLength / rec);
  if (n * rec !== buf.byteLength) {
    throw new FormatError("truncated record", n * rec);
  }
  for (let i = 0; i < n; i++) {
    const di = dv.getInt32(i * rec, true);
    if (di !== d) {
      throw new FormatError(
        `record ${i} has dimensionality ${di}, expected ${d}`,
        i * rec
      );
    }
  }
  return { d, n, dv };
}

export function decodeFvecs(buf: Buffer): Float32Array[] {
  const { d, n, dv } = decodeRecords(buf);
  const rows: Float32Array[] = [];
  for (let i = 0; i < n; i++) {
    const base = i * (4 + 4 * d) + 4;
    const row = new Float32Array(d);
    for (let j = 0; j < d; j++) {
      row[j] = dv.getFloat32(base + 4 * j, true);
    }
    rows.push(row);
  }
  return rows;
}

export function decodeIvecs(buf: Buffer): Int32Array[] {
  const { d, n, dv } = decodeRecords(buf);
  const rows: Int32Array[] = [];
  for (let i = 0; i < n; i++) {
    const base = i * (4 + 4 * d) + 4;
    const row = new Int32Array(d);
    for (let j = 0; j < d; j++) {
      row[j] = dv.getInt32(base + 4 * j, true);
    }
    rows.push(row);
  }
  return rows;
}

function checkRecordShape(rows: ArrayLike<ArrayLike<number>>): number {
  if (rows.length === 0) {
    throw new Error("refusing to encode a file with no records");
  }
  const d = rows[0].length;
  if (d === 0) {
    throw new Error("refusing to encode zero-dimensional records");
  }
  for (let i = 0; i < rows.length; i++) {
    if (rows[i].length !== d) {
      throw new Error(
        `record ${i} has length ${rows[i].length}, expected ${d}`
      );
    }
  }
  return d;
}

export function encodeFvecs(rows: readonly Float32Array[]): Buffer {
  const d = checkRecordShape(rows);
  const rec = 4 + 4 * d;
  const buf = Buffer.alloc(rows.length * rec);
  const dv = view(buf);
  for (let i = 0; i < rows.length; i++) {
    dv.setInt32(i * rec, d, true);
    for (let j = 0; j < d; j++) {
      dv.setFloat32(i * rec + 4 + 4 * j, rows[i][j], true);
    }
  }
  return buf;
}

export function encodeIvecs(rows: readonly Int32Array[]): Buffer {
  const d = checkRecordShape(rows);
  const rec = 4 + 4 * d;
  const buf = Buffer.alloc(rows.length * rec);
  const dv = view(buf);
  for (let i = 0; i < rows.length; i++) {
    dv.setInt32(i * rec, d, true);
    for (let j = 0; j < d; j++) {
      dv.setInt32(i * rec + 4 + 4 * j, rows[i][j], true);
    }
  }
  return buf;
}

export function decodeCsr(buf: Buffer): CsrData {
  if (buf.byteLength < CSR_HEADER_BYTES) {
    throw new FormatError("truncated header", 0);
  }
  const dv = view(buf);
  const nrows = u64(dv, 0, "row count");
  const ncols = u64(dv, 8, "column count");
  const nnz = u64(dv, 16, "nonzero count");

  let pos = CSR_HEADER_BYTES;
  if (buf.byteLength < pos + 8 * (nrows + 1)) {
    throw new FormatError("truncated row offsets", pos);
  }
  const offsets = new Array<number>(nrows + 1);
  for (let i = 0; i <= nrows; i++) {
    offsets[i] = u64(dv, pos + 8 * i, "row offset");
  }
  if (offsets[0] !== 0) {
    throw new FormatError(`offsets[0] = ${offsets[0]}, expected 0`, pos);
  }
  for (let i = 0; i < nrows; i++) {
    if (offsets[i + 1] < offsets[i]) {
      throw new FormatError(`offsets decrease at row ${i}`, pos + 8 * (i + 1));
    }
  }
  if (offsets[nrows] !== nnz) {
    throw new FormatError(
      `offsets end at ${offsets[nrows]} but header declares nnz=${nnz}`,
      pos + 8 * nrows
    );
  }
  pos += 8 * (nrows + 1);

  if (buf.byteLength < pos + 4 * nnz) {
    throw new FormatError("truncated column indices", pos);
  }
  const indices = new Int32Array(nnz);
  for (let i = 0; i < nnz; i++) {
    const c = dv.getInt32(pos + 4 * i, true);
    if (c < 0 || c >= ncols) {
      throw new FormatError(
        `column index ${c} out of range [0, ${ncols})`,
        pos + 4 * i
      );
    }
    indices[i] = c;
  }
  pos += 4 * nnz;

  if (buf.byteLength < pos + 4 * nnz) {
    throw new FormatError("truncated values", pos);
  }
  const values = new Float32Array(nnz);
  for (let i = 0; i < nnz; i++) {
    const v = dv.getFloat32(pos + 4 * i, true);
    if (!Number.isFinite(v)) {
      throw new FormatError(`non-finite value at entry ${i}`, pos + 4 * i);
    }
    values[i] = v;
  }
  if (buf.byteLength > pos + 4 * nnz) {
    throw new FormatError(
      `${buf.byteLength - pos - 4 * nnz} trailing bytes`,
      pos + 4 * nnz
    );
  }

  const rows: SparseRow[] = [];
  for (let i = 0; i < nrows; i++) {
    rows.push({
      indices: indices.slice(offsets[i], offsets[i + 1]),
      values: values.slice(offsets[i], offsets[i + 1]),
    });
  }
  return { ncols, rows };
}

export function encodeCsr(rows: readonly SparseRow[], ncols: number): Buffer {
  if (!Number.isInteger(ncols) || ncols < 1) {
    throw new Error(`ncols must be an integer >= 1, got ${ncols}`);
  }
  let nnz = 0;
  for (let i = 0; i < rows.length; i++) {
    const { indices, values } = rows[i];
    if (indices.length !== values.length) {
      throw new Error(
        `row ${i}: ${indices.length} indices but ${values.length} values`
      );
    }
    for (let j = 0; j < indices.length; j++) {
      if (indices[j] < 0 || indices[j] >= ncols) {
        throw new Error(
          `row ${i}: column ${indices[j]} out of range [0, ${ncols})`
        );
      }
      if (j > 0 && indices[j] <= indices[j - 1]) {
        throw new Error(`row ${i}: columns must strictly increase`);
      }
      if (!Number.isFinite(values[j]) || values[j] === 0) {
        throw new Error(`row ${i}: values must be finite and nonzero`);
      }
    }
    nnz += indices.length;
  }

  const total =
    CSR_HEADER_BYTES + 8 * (rows.length + 1) + 4 * nnz + 4 * nnz;
  const buf = Buffer.alloc(total);
  const dv = view(buf);
  dv.setBigUint64(0, BigInt(rows.length), true);
  dv.setBigUint64(8, BigInt(ncols), true);
  dv.setBigUint64(16, BigInt(nnz), true);
  let pos = CSR_HEADER_BYTES;
  let running = 0;
  dv.setBigUint64(pos, 0n, true);
  for (let i = 0; i < rows.length; i++) {
    running += rows[i].indices.length;
    dv.setBigUint64(pos + 8 * (i + 1), BigInt(running), true);
  }
  pos += 8 * (rows.length + 1);
  for (const row of rows) {
    for (let j = 0; j < row.indices.length; j++) {
      dv.setInt32(pos, row.indices[j], true);
      pos += 4;
    }
  }
  for (const row of rows) {
    for (let j = 0; j < row.values.length; j++) {
      dv.setFloat32(pos, row.values[j], true);
      pos += 4;
    }
  }
  return buf;
}

export function readFvecs(path: string): Float32Array[] {
  return decodeFvecs(fs.readFileSync(path));
}

export function writeFvecs(path: string, rows: readonly Float32Array[]): void {
  fs.writeFileSync(path, encodeFvecs(rows));
}

export function readIvecs(path: string): Int32Array[] {
  return decodeIvecs(fs.readFileSync(path));
}

export function writeIvecs(path: string, rows: readonly Int32Array[]): void {
  fs.writeFileSync(path, encodeIvecs(rows));
}

export function readCsr(path: string): CsrData {
  return decodeCsr(fs.readFileSync(path));
}

export function writeCsr(
  path: string,
  rows: readonly SparseRow[],
  ncols: number
): void {
  fs.writeFileSync(path, encodeCsr(rows, ncols));
}
