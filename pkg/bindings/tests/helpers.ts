import { spawnSync } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

/** Small deterministic PRNG so fixtures are stable across runs. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomWord(rand: () => number, alphabet: string, minLen: number, maxLen: number): string {
  const length = minLen + Math.floor(rand() * (maxLen - minLen + 1));
  let word = "";
  for (let i = 0; i < length; i++) {
    word += alphabet[Math.floor(rand() * alphabet.length)];
  }
  return word;
}

export interface FixtureSample {
  id: string;
  writer: string;
  label: string;
  signal: number[][];
}

/** Deterministic dataset fixture written in the core's JSONL format. */
export function writeDatasetFixture(
  path: string,
  options: { samples?: number; writers?: number; alphabet?: string; seed?: number } = {},
): FixtureSample[] {
  const nSamples = options.samples ?? 24;
  const nWriters = options.writers ?? 3;
  const alphabet = options.alphabet ?? "abcd";
  const rand = mulberry32(options.seed ?? 7);
  const records: FixtureSample[] = [];
  for (let i = 0; i < nSamples; i++) {
    const frames = 6 + Math.floor(rand() * 7);
    const signal: number[][] = [];
    for (let t = 0; t < frames; t++) {
      signal.push([round4(rand() * 2 - 1), round4(rand() * 2 - 1)]);
    }
    records.push({
      id: `s${String(i).padStart(4, "0")}`,
      writer: `w${i % nWriters}`,
      label: randomWord(rand, alphabet, 2, 6),
      signal,
    });
  }
  writeFileSync(path, records.map((r) => JSON.stringify(r)).join("\n") + "\n", "utf-8");
  return records;
}

function round4(value: number): number {
  return Math.round(value * 10000) / 10000;
}

export function makeTempDir(): string {
  return mkdtempSync(join(tmpdir(), "hwtok-bind-test-"));
}

/** Drive the core CLI directly, bypassing the bindings, for parity checks. */
export function runCliDirect(args: string[]): { stdout: string; status: number } {
  const proc = spawnSync(process.env.HWTOK_PYTHON ?? "python3", ["-m", "hwtok", ...args], {
    encoding: "utf-8",
  });
  return { stdout: proc.stdout ?? "", status: proc.status ?? -1 };
}
