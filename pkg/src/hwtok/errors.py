"""Exception hierarchy shared across the pipeline.

Every expected failure mode raises a subclass of :class:`PipelineError` so the
command line layer can distinguish bad input (exit code 2) from internal bugs
(exit code 1).
"""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all anticipated pipeline failures."""


class DatasetError(PipelineError):
    """Malformed dataset file or sample record."""


class SplitError(PipelineError):
    """Fold splitting cannot satisfy its constraints."""


class TokenizerError(PipelineError):
    """Tokenizer training, encoding, or decoding failure."""


class VocabSizeError(TokenizerError):
    """Requested vocabulary size is below the alphabet size."""


class UnknownSymbolError(TokenizerError):
    """Input text contains a character outside the model alphabet."""

    def __init__(self, char: str, offset: int) -> None:
        super().__init__(f"unknown character {char!r} at offset {offset}")
        self.char = char
        self.offset = offset


class ModelFormatError(TokenizerError):
    """Serialized tokenizer model violates the schema."""


class AugmentError(PipelineError):
    """Concatenation augmentation cannot be performed."""


class LogitFileError(PipelineError):
    """Binary logit file or its index is malformed or inconsistent."""


class MetricError(PipelineError):
    """Metric inputs violate a precondition (e.g. empty reference)."""


class ConfigError(PipelineError):
    """Experiment configuration file is invalid."""
