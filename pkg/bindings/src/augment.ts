import { readFileSync, readdirSync } from "node:fs";
import { join } from "node:path";

import { MarshalError } from "./errors.js";
import { runCore, withScratchDir } from "./proc.js";
import { BoundTokenizer } from "./tokenizer.js";

/** One concatenated sample, with the exact keys of the core's dump format. */
export interface AugmentedRecord {
  id: string;
  writer: string;
  label: string;
  signal: number[][];
  sources: string[];
  token_ids?: number[];
}

export interface AugmentOptions {
  /** Path to the dataset JSONL file. */
  dataset: string;
  protocol?: "wd" | "wi";
  folds?: number;
  fold?: number;
  seed?: number;
  /** Partners appended to every training sample. */
  concat?: number;
  separator?: string;
  epoch?: number;
  /** Attach token ids for the joined labels using this tokenizer. */
  model?: BoundTokenizer;
}

/**
 * Stream one augmented epoch. The core writes the epoch to a scratch file,
 * which is parsed eagerly (so the scratch space can be reclaimed) and then
 * handed out one record at a time.
 */
export function* augmentEpoch(options: AugmentOptions): Generator<AugmentedRecord> {
  const records = withScratchDir((dir) => {
    const outDir = join(dir, "aug");
    const args = ["augment", "--dataset", options.dataset, "--out", outDir];
    if (options.protocol !== undefined) args.push("--protocol", options.protocol);
    if (options.folds !== undefined) args.push("--folds", String(options.folds));
    if (options.fold !== undefined) args.push("--fold", String(options.fold));
    if (options.seed !== undefined) args.push("--seed", String(options.seed));
    if (options.concat !== undefined) args.push("--concat", String(options.concat));
    if (options.separator !== undefined) args.push("--separator", options.separator);
    if (options.epoch !== undefined) args.push("--epoch", String(options.epoch));
    if (options.model !== undefined) args.push("--model", options.model.modelPath);
    runCore(args);
    const dump = readdirSync(outDir).find((name) => name.endsWith(".jsonl"));
    if (dump === undefined) {
      throw new MarshalError("core produced no augmentation dump");
    }
    const payload = readFileSync(join(outDir, dump), "utf-8");
    return payload
      .split("\n")
      .filter((line) => line.length > 0)
      .map((line) => JSON.parse(line) as AugmentedRecord);
  });
  yield* records;
}
