export { CoreError, HandleClosedError, MarshalError } from "./errors.js";
export { VERSION, coreVersion } from "./proc.js";
export {
  BoundTokenizer,
  loadTokenizer,
  trainTokenizer,
  type TokenizerKind,
  type TrainConfig,
} from "./tokenizer.js";
export { augmentEpoch, type AugmentOptions, type AugmentedRecord } from "./augment.js";
export { cer, wer } from "./metrics.js";
export { encodeLogitRecord, greedyDecode } from "./ctc.js";
