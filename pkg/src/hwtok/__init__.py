"""Sub-word tokenization, concatenation augmentation, and CTC evaluation for
multichannel handwriting signals."""

__version__ = "0.1.0"

from .augment import (
    AugmentedSample,
    AugmentPlan,
    augment_epoch,
    concat_augment,
    equivalent_epochs,
)
from .corpus import (
    CharStat,
    Dataset,
    Divergence,
    FoldSplit,
    Sample,
    char_distribution,
    distribution_divergence,
    load_dataset,
    load_folds,
    make_sample,
    save_dataset,
    save_folds,
    split_folds,
)
from .ctc import (
    collapse_path,
    ctc_feasible,
    ctc_forward_nll,
    feasibility_report,
    greedy_decode,
    load_logit_index,
    min_frames,
    read_logit_entry,
    write_logit_file,
)
from .errors import (
    AugmentError,
    ConfigError,
    DatasetError,
    LogitFileError,
    MetricError,
    ModelFormatError,
    PipelineError,
    SplitError,
    TokenizerError,
    UnknownSymbolError,
    VocabSizeError,
)
from .metrics import (
    EditOps,
    EvalReport,
    TokenUsageTable,
    cer,
    edit_distance,
    evaluate,
    token_usage,
    wer,
)
from .tokenizer import (
    TokenizerModel,
    UnigramConfig,
    decode_tokens,
    encode,
    load_model,
    save_model,
    train,
    train_bigram,
    train_bpe,
    train_char,
    train_unigram,
)

__all__ = [
    "__version__",
    "AugmentError",
    "AugmentPlan",
    "AugmentedSample",
    "CharStat",
    "ConfigError",
    "Dataset",
    "DatasetError",
    "Divergence",
    "EditOps",
    "EvalReport",
    "FoldSplit",
    "LogitFileError",
    "MetricError",
    "ModelFormatError",
    "PipelineError",
    "Sample",
    "SplitError",
    "TokenUsageTable",
    "TokenizerError",
    "TokenizerModel",
    "UnigramConfig",
    "UnknownSymbolError",
    "VocabSizeError",
    "augment_epoch",
    "cer",
    "char_distribution",
    "collapse_path",
    "concat_augment",
    "ctc_feasible",
    "ctc_forward_nll",
    "decode_tokens",
    "distribution_divergence",
    "edit_distance",
    "encode",
    "equivalent_epochs",
    "evaluate",
    "feasibility_report",
    "greedy_decode",
    "load_dataset",
    "load_folds",
    "load_logit_index",
    "load_model",
    "make_sample",
    "min_frames",
    "read_logit_entry",
    "save_dataset",
    "save_folds",
    "save_model",
    "split_folds",
    "token_usage",
    "train",
    "train_bigram",
    "train_bpe",
    "train_char",
    "train_unigram",
    "wer",
    "write_logit_file",
]
