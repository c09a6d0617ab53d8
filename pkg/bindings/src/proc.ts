import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { CoreError } from "./errors.js";

/** Version of the core library these bindings target. Must match exactly. */
export const VERSION = "0.1.0";

const PYTHON = process.env.HWTOK_PYTHON ?? "python3";

/** Run one core subcommand to completion; throws CoreError on failure. */
export function runCore(args: string[]): string {
  const proc = spawnSync(PYTHON, ["-m", "hwtok", ...args], {
    encoding: "utf-8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (proc.error) {
    throw new CoreError("internal", `failed to launch core: ${proc.error.message}`, -1, "");
  }
  if (proc.status !== 0) {
    const stderr = proc.stderr ?? "";
    // the core prefixes handled failures with "error: "
    const match = stderr.match(/^error: (.*)$/m);
    const message = match ? match[1] : stderr.trim() || `core exited with ${proc.status}`;
    const kind = proc.status === 2 ? "input" : "internal";
    throw new CoreError(kind, message, proc.status ?? -1, stderr);
  }
  return proc.stdout;
}

export function coreVersion(): string {
  return runCore(["--version"]).trim().split(/\s+/).pop() ?? "";
}

/** Create a private scratch directory; the caller owns its lifetime. */
export function makeScratchDir(): string {
  return mkdtempSync(join(tmpdir(), "hwtok-bind-"));
}

export function removeScratchDir(dir: string): void {
  rmSync(dir, { recursive: true, force: true });
}

/** Run `body` with a scratch directory that is always cleaned up. */
export function withScratchDir<T>(body: (dir: string) => T): T {
  const dir = makeScratchDir();
  try {
    return body(dir);
  } finally {
    removeScratchDir(dir);
  }
}
