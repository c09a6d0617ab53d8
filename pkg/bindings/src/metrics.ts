import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { MarshalError } from "./errors.js";
import { runCore, withScratchDir } from "./proc.js";

interface ScoreReport {
  cer: number;
  wer: number;
  n_samples: number;
}

function scoreLines(predictions: string[], references: string[]): ScoreReport {
  if (predictions.length !== references.length) {
    throw new MarshalError(
      `got ${predictions.length} predictions for ${references.length} references`,
    );
  }
  for (const line of [...predictions, ...references]) {
    if (line.includes("\n") || line.includes("\r")) {
      throw new MarshalError("predictions and references must not contain line breaks");
    }
  }
  return withScratchDir((dir) => {
    const predsFile = join(dir, "preds.txt");
    const refsFile = join(dir, "refs.txt");
    const outDir = join(dir, "score");
    writeFileSync(predsFile, predictions.join("\n") + "\n", "utf-8");
    writeFileSync(refsFile, references.join("\n") + "\n", "utf-8");
    runCore(["score", "--preds", predsFile, "--refs", refsFile, "--out", outDir]);
    return JSON.parse(readFileSync(join(outDir, "report.json"), "utf-8")) as ScoreReport;
  });
}

/** Corpus-normalized character error rate in percent, exactly as the core computes it. */
export function cer(predictions: string[], references: string[]): number {
  return scoreLines(predictions, references).cer;
}

/** Corpus-normalized word error rate in percent, exactly as the core computes it. */
export function wer(predictions: string[], references: string[]): number {
  return scoreLines(predictions, references).wer;
}
