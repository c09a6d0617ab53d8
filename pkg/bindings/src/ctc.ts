import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { MarshalError } from "./errors.js";
import { runCore, withScratchDir } from "./proc.js";

const MAGIC = "CTCL";
const FORMAT_VERSION = 1;

/** Serialize one frames-x-classes matrix in the core's binary logit format. */
export function encodeLogitRecord(matrix: number[][]): Buffer {
  const frames = matrix.length;
  if (frames === 0) {
    throw new MarshalError("logit matrix needs at least one frame");
  }
  const classes = matrix[0].length;
  if (classes < 2) {
    throw new MarshalError("logit matrix needs at least two classes");
  }
  const buffer = Buffer.alloc(16 + frames * classes * 4);
  buffer.write(MAGIC, 0, "ascii");
  buffer.writeUInt32LE(FORMAT_VERSION, 4);
  buffer.writeUInt32LE(frames, 8);
  buffer.writeUInt32LE(classes, 12);
  let offset = 16;
  for (const row of matrix) {
    if (row.length !== classes) {
      throw new MarshalError("logit matrix rows must have equal length");
    }
    for (const value of row) {
      if (!Number.isFinite(value)) {
        throw new MarshalError("logit values must be finite");
      }
      buffer.writeFloatLE(value, offset);
      offset += 4;
    }
  }
  return buffer;
}

/**
 * Best-path decoding of one score matrix (columns: blank then class ids
 * 1..C-1): collapse repeats, then drop blanks. Values are stored as float32,
 * matching the core's on-disk precision.
 */
export function greedyDecode(matrix: number[][]): number[] {
  return withScratchDir((dir) => {
    const logits = join(dir, "m.logits");
    const index = join(dir, "m.index.jsonl");
    const output = join(dir, "decoded.jsonl");
    writeFileSync(logits, encodeLogitRecord(matrix));
    writeFileSync(index, JSON.stringify({ id: "m0", offset: 0 }) + "\n", "utf-8");
    runCore(["decode", "--logits", logits, "--index", index, "--output", output]);
    const record = JSON.parse(readFileSync(output, "utf-8").split("\n")[0]) as {
      token_ids: number[];
    };
    return record.token_ids;
  });
}
