import { copyFileSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { HandleClosedError, MarshalError } from "./errors.js";
import { makeScratchDir, removeScratchDir, runCore, withScratchDir } from "./proc.js";

export type TokenizerKind = "char" | "bigram" | "bpe" | "unigram";

export interface TrainConfig {
  maxCandidateLen?: number;
  minCount?: number;
  emRounds?: number;
  pruneFraction?: number;
}

interface ModelFile {
  version: number;
  kind: TokenizerKind;
  alphabet: string[];
  vocab: { id: number; text: string }[];
}

function checkSingleLine(value: string, what: string): void {
  if (value.includes("\n") || value.includes("\r")) {
    throw new MarshalError(`${what} must not contain line breaks`);
  }
}

/**
 * Handle to a trained tokenizer model. All operations delegate to the core
 * pipeline through its model file format; nothing is recomputed here. The
 * handle owns a scratch copy of the model on disk and is immutable after
 * construction; close() releases the copy and invalidates the handle.
 */
export class BoundTokenizer {
  private readonly dir: string;
  readonly modelPath: string;
  private readonly parsed: ModelFile;
  private closed = false;

  private constructor(dir: string, modelPath: string) {
    this.dir = dir;
    this.modelPath = modelPath;
    this.parsed = JSON.parse(readFileSync(modelPath, "utf-8")) as ModelFile;
  }

  /** Train a tokenizer of `kind` on `labels` with vocabulary budget `vocabSize`. */
  static train(
    kind: TokenizerKind,
    labels: string[],
    vocabSize: number,
    config: TrainConfig = {},
  ): BoundTokenizer {
    if (labels.length === 0) {
      throw new MarshalError("training needs at least one label");
    }
    for (const label of labels) {
      checkSingleLine(label, "label");
      if (label === "") {
        throw new MarshalError("labels must be non-empty");
      }
    }
    const dir = makeScratchDir();
    try {
      const labelFile = join(dir, "labels.txt");
      writeFileSync(labelFile, labels.join("\n") + "\n", "utf-8");
      const outDir = join(dir, "train");
      const args = [
        "train-tokenizer",
        "--labels", labelFile,
        "--out", outDir,
        "--tokenizer", kind,
        "--vocab-size", String(vocabSize),
      ];
      if (config.maxCandidateLen !== undefined) {
        args.push("--max-candidate-len", String(config.maxCandidateLen));
      }
      if (config.minCount !== undefined) {
        args.push("--min-count", String(config.minCount));
      }
      if (config.emRounds !== undefined) {
        args.push("--em-rounds", String(config.emRounds));
      }
      if (config.pruneFraction !== undefined) {
        args.push("--prune-fraction", String(config.pruneFraction));
      }
      runCore(args);
      return new BoundTokenizer(dir, join(outDir, "models", `${kind}_v${vocabSize}.json`));
    } catch (err) {
      removeScratchDir(dir);
      throw err;
    }
  }

  /** Wrap an existing model file; the file is copied, not referenced. */
  static fromFile(path: string): BoundTokenizer {
    const dir = makeScratchDir();
    try {
      const modelPath = join(dir, "model.json");
      copyFileSync(path, modelPath);
      return new BoundTokenizer(dir, modelPath);
    } catch (err) {
      removeScratchDir(dir);
      throw err;
    }
  }

  get kind(): TokenizerKind {
    this.assertOpen();
    return this.parsed.kind;
  }

  get vocabSize(): number {
    this.assertOpen();
    return this.parsed.vocab.length;
  }

  /** The serialized model exactly as the core wrote it. */
  modelBytes(): Buffer {
    this.assertOpen();
    return readFileSync(this.modelPath);
  }

  encode(text: string): number[] {
    return this.encodeMany([text])[0];
  }

  encodeMany(texts: string[]): number[][] {
    this.assertOpen();
    for (const text of texts) {
      checkSingleLine(text, "text");
    }
    if (texts.length === 0) {
      return [];
    }
    return withScratchDir((dir) => {
      const input = join(dir, "in.txt");
      const output = join(dir, "out.txt");
      writeFileSync(input, texts.join("\n") + "\n", "utf-8");
      runCore(["encode", "--model", this.modelPath, "--input", input, "--output", output]);
      const rows = splitRows(readFileSync(output, "utf-8"), texts.length);
      return rows.map((row) => (row === "" ? [] : row.split(" ").map(Number)));
    });
  }

  decode(ids: number[]): string {
    return this.decodeMany([ids])[0];
  }

  decodeMany(idRows: number[][]): string[] {
    this.assertOpen();
    if (idRows.length === 0) {
      return [];
    }
    return withScratchDir((dir) => {
      const input = join(dir, "ids.txt");
      const output = join(dir, "out.txt");
      const lines = idRows.map((ids) => ids.join(" "));
      writeFileSync(input, lines.join("\n") + "\n", "utf-8");
      runCore(["decode", "--model", this.modelPath, "--input", input, "--output", output]);
      return splitRows(readFileSync(output, "utf-8"), idRows.length);
    });
  }

  close(): void {
    if (!this.closed) {
      this.closed = true;
      removeScratchDir(this.dir);
    }
  }

  get isClosed(): boolean {
    return this.closed;
  }

  private assertOpen(): void {
    if (this.closed) {
      throw new HandleClosedError();
    }
  }
}

function splitRows(payload: string, expected: number): string[] {
  const rows = payload.length === 0 ? [] : payload.replace(/\n$/, "").split("\n");
  if (rows.length !== expected) {
    throw new MarshalError(`core returned ${rows.length} rows, expected ${expected}`);
  }
  return rows;
}

export function trainTokenizer(
  kind: TokenizerKind,
  labels: string[],
  vocabSize: number,
  config: TrainConfig = {},
): BoundTokenizer {
  return BoundTokenizer.train(kind, labels, vocabSize, config);
}

export function loadTokenizer(path: string): BoundTokenizer {
  return BoundTokenizer.fromFile(path);
}
