import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import type { SparseRow } from "../src/formats.js";

/** Deterministic PRNG so test corpora are identical run to run. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function makeDense(n: number, d: number, seed: number): Float32Array[] {
  const rand = mulberry32(seed);
  const rows: Float32Array[] = [];
  for (let i = 0; i < n; i++) {
    const row = new Float32Array(d);
    for (let j = 0; j < d; j++) {
      row[j] = Math.fround(rand() * 10 - 5);
    }
    rows.push(row);
  }
  return rows;
}

export function makeSparseRows(
  n: number,
  dim: number,
  maxNnz: number,
  seed: number
): SparseRow[] {
  const rand = mulberry32(seed);
  const rows: SparseRow[] = [];
  for (let i = 0; i < n; i++) {
    const nnz = 1 + Math.floor(rand() * maxNnz);
    const cols = new Set<number>();
    while (cols.size < nnz) {
      cols.add(Math.floor(rand() * dim));
    }
    const indices = Int32Array.from([...cols].sort((a, b) => a - b));
    const values = new Float32Array(nnz);
    for (let j = 0; j < nnz; j++) {
      values[j] = Math.fround(rand() * 2 + 0.25);
    }
    rows.push({ indices, values });
  }
  return rows;
}

export function tmpDir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "annkit-frontend-"));
}
