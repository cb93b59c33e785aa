/**
 * Process plumbing for the annkit executable.
 *
 * The engine is reached only through its CLI and file formats; nothing here
 * links against it. Set ANNKIT_CLI to point at a specific executable,
 * otherwise "annkit" is resolved from PATH.
 */

import { execFile, spawnSync } from "node:child_process";

/** Nonzero exit from the engine: 2 means a malformed input file, 3 means a
 * usage error (bad flags or invalid argument combinations). */
export class CliError extends Error {
  constructor(
    message: string,
    readonly exitCode: number,
    readonly stderr: string
  ) {
    super(message);
    this.name = "CliError";
  }
}

export function cliPath(): string {
  return process.env.ANNKIT_CLI ?? "annkit";
}

/** Run one annkit subcommand to completion and return its stdout. Blocks
 * the event loop; prefer runCliAsync for index builds on large inputs. */
export function runCli(args: readonly string[]): string {
  const res = spawnSync(cliPath(), args, {
    encoding: "utf8",
    maxBuffer: 64 * 1024 * 1024,
  });
  if (res.error) {
    throw new Error(`failed to launch ${cliPath()}: ${res.error.message}`);
  }
  if (res.status !== 0) {
    const detail = res.stderr.trim() || `exit code ${res.status}`;
    throw new CliError(
      `annkit ${args[0]} failed: ${detail}`,
      res.status ?? -1,
      res.stderr
    );
  }
  return res.stdout;
}

/** Non-blocking variant of runCli. */
export function runCliAsync(args: readonly string[]): Promise<string> {
  return new Promise((resolve, reject) => {
    execFile(
      cliPath(),
      args,
      { maxBuffer: 64 * 1024 * 1024 },
      (err, stdout, stderr) => {
        if (err === null) {
          resolve(stdout);
          return;
        }
        // execFile reports the exit status as a numeric err.code; launch
        // failures carry a string errno like ENOENT instead.
        const code = (err as Error & { code?: number | string }).code;
        if (typeof code === "number") {
          const detail = stderr.trim() || `exit code ${code}`;
          reject(new CliError(`annkit ${args[0]} failed: ${detail}`,
                              code, stderr));
        } else {
          reject(new Error(`failed to launch ${cliPath()}: ${err.message}`));
        }
      }
    );
  });
}
