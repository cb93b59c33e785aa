/**
 * Typed wrappers over the annkit CLI: build or load an index file, run
 * searches, compute exact ground truth, and sweep recall/QPS benchmarks.
 * All vector exchange goes through the binary file formats in formats.ts.
 */

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { runCli, runCliAsync } from "./cli.js";
import { readIvecs } from "./formats.js";

export interface BuildOptions {
  /** Input vector file (fvecs for dense, csr for sparse). */
  data: string;
  /** Index file to write. */
  output: string;
  format?: "fvecs" | "csr";
  metric?: "l2" | "ip";
  /** Graph degree parameter. */
  m?: number;
  /** Construction beam width. */
  efConstruction?: number;
  quantizer?: "none" | "pq";
  pqM?: number;
  pqKs?: number;
  trainIters?: number;
  seed?: number;
}

export interface SearchOptions {
  /** Query file in the representation the index stores. */
  queries: string;
  k: number;
  /** Search beam width, at least k. */
  ef: number;
  /** Where to keep the ivecs result rows; a temp file when omitted. */
  output?: string;
}

export interface GroundTruthOptions {
  data: string;
  queries: string;
  output: string;
  k?: number;
  measure?: "l2" | "ip";
  format?: "fvecs" | "csr";
}

export interface BenchOptions {
  index: string;
  queries: string;
  groundTruth: string;
  efList: readonly number[];
  csv: string;
  k?: number;
}

export interface BenchRecord {
  ef: number;
  k: number;
  /** Mean recall@k over the query batch. */
  recall: number;
  qps: number;
  meanLatencyUs: number;
}

export const CSV_HEADER = "ef,k,recall,qps,mean_latency_us";

function pushFlag(args: string[], flag: string, value: unknown): void {
  if (value !== undefined) {
    args.push(flag, String(value));
  }
}

function buildArgs(options: BuildOptions): string[] {
  const args = ["build", "--data", options.data];
  pushFlag(args, "--format", options.format);
  pushFlag(args, "--metric", options.metric);
  pushFlag(args, "--m", options.m);
  pushFlag(args, "--efc", options.efConstruction);
  pushFlag(args, "--quantizer", options.quantizer);
  pushFlag(args, "--pq-m", options.pqM);
  pushFlag(args, "--pq-ks", options.pqKs);
  pushFlag(args, "--train-iters", options.trainIters);
  pushFlag(args, "--seed", options.seed);
  args.push("--output", options.output);
  return args;
}

/** A saved index file, queryable through the CLI. */
export class Index {
  private constructor(readonly path: string) {}

  /** Build an index from a vector file and save it to options.output.
   * Blocks until the build finishes; use buildAsync for large inputs. */
  static build(options: BuildOptions): Index {
    runCli(buildArgs(options));
    return new Index(options.output);
  }

  /** Non-blocking variant of build. */
  static async buildAsync(options: BuildOptions): Promise<Index> {
    await runCliAsync(buildArgs(options));
    return new Index(options.output);
  }

  /** Wrap an existing index file. */
  static load(indexPath: string): Index {
    fs.accessSync(indexPath, fs.constants.R_OK);
    return new Index(indexPath);
  }

  private searchArgs(options: SearchOptions, out: string): string[] {
    return [
      "search",
      "--index", this.path,
      "--queries", options.queries,
      "--k", String(options.k),
      "--ef", String(options.ef),
      "--output", out,
    ];
  }

  /**
   * Search every query row, best neighbors first. Rows are padded with -1
   * when the index holds fewer than k vectors.
   */
  search(options: SearchOptions): Int32Array[] {
    const { out, scratch } = resolveOutput(options.output);
    try {
      runCli(this.searchArgs(options, out));
      return readIvecs(out);
    } finally {
      cleanupScratch(scratch);
    }
  }

  /** Non-blocking variant of search. */
  async searchAsync(options: SearchOptions): Promise<Int32Array[]> {
    const { out, scratch } = resolveOutput(options.output);
    try {
      await runCliAsync(this.searchArgs(options, out));
      return readIvecs(out);
    } finally {
      cleanupScratch(scratch);
    }
  }
}

function resolveOutput(output: string | undefined): {
  out: string;
  scratch: string | undefined;
} {
  if (output !== undefined) {
    return { out: output, scratch: undefined };
  }
  const scratch = fs.mkdtempSync(path.join(os.tmpdir(), "annkit-"));
  return { out: path.join(scratch, "results.ivecs"), scratch };
}

function cleanupScratch(scratch: string | undefined): void {
  if (scratch !== undefined) {
    fs.rmSync(scratch, { recursive: true, force: true });
  }
}

/** Exact top-k ids by exhaustive scan, written to options.output. */
export function groundTruth(options: GroundTruthOptions): Int32Array[] {
  const args = ["ground-truth", "--data", options.data,
                "--queries", options.queries];
  pushFlag(args, "--format", options.format);
  pushFlag(args, "--k", options.k);
  pushFlag(args, "--measure", options.measure);
  args.push("--output", options.output);
  runCli(args);
  return readIvecs(options.output);
}

/** The figure the bench subcommand renders next to its CSV. */
export function figurePathFor(csvPath: string): string {
  const parsed = path.parse(csvPath);
  return path.join(parsed.dir, `${parsed.name}.png`);
}

/**
 * Sweep search beam widths against ground truth. Returns one record per ef;
 * the CSV and a recall-vs-QPS figure are left at options.csv and
 * figurePathFor(options.csv).
 */
export function bench(options: BenchOptions): BenchRecord[] {
  const args = [
    "bench",
    "--index", options.index,
    "--queries", options.queries,
    "--ground-truth", options.groundTruth,
  ];
  pushFlag(args, "--k", options.k);
  args.push("--ef-list", options.efList.join(","));
  args.push("--csv", options.csv);
  runCli(args);
  return parseBenchCsv(fs.readFileSync(options.csv, "utf8"));
}

export function parseBenchCsv(text: string): BenchRecord[] {
  const lines = text.trim().split("\n");
  if (lines[0] !== CSV_HEADER) {
    throw new Error(`unexpected CSV header: ${lines[0]}`);
  }
  return lines.slice(1).map((line) => {
    const parts = line.split(",").map(Number);
    if (parts.length !== 5 || parts.some((x) => !Number.isFinite(x))) {
      throw new Error(`malformed CSV row: ${line}`);
    }
    return {
      ef: parts[0],
      k: parts[1],
      recall: parts[2],
      qps: parts[3],
      meanLatencyUs: parts[4],
    };
  });
}

export { CliError, cliPath, runCli, runCliAsync } from "./cli.js";
export * from "./formats.js";
