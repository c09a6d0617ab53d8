"""Recognition error rates and token usage statistics.

Error rates are corpus-normalized: total edit operations divided by total
reference length, times 100. The operation breakdown follows one optimal
alignment transforming the prediction into the reference.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .errors import MetricError
from .tokenizer import TokenizerModel, encode

USAGE_BUCKETS = ("1", "2", "3", "4", "5+")


class EditOps(NamedTuple):
    distance: int
    substitutions: int
    deletions: int
    insertions: int


def edit_distance(source: Sequence, reference: Sequence) -> EditOps:
    """Unit-cost Levenshtein distance with an operation breakdown.

    Works on any pair of sequences (strings for character level, word lists
    for word level). The breakdown describes edits turning ``source`` into
    ``reference``; when several optimal alignments exist, substitution is
    preferred over deletion over insertion.
    """
    n_src = len(source)
    n_ref = len(reference)
    previous = [EditOps(j, 0, 0, j) for j in range(n_ref + 1)]
    for i in range(1, n_src + 1):
        current = [EditOps(i, 0, i, 0)]
        for j in range(1, n_ref + 1):
            if source[i - 1] == reference[j - 1]:
                diagonal = previous[j - 1]
            else:
                d = previous[j - 1]
                diagonal = EditOps(d.distance + 1, d.substitutions + 1, d.deletions, d.insertions)
            d = previous[j]
            deletion = EditOps(d.distance + 1, d.substitutions, d.deletions + 1, d.insertions)
            d = current[j - 1]
            insertion = EditOps(d.distance + 1, d.substitutions, d.deletions, d.insertions + 1)
            best = diagonal
            if deletion.distance < best.distance:
                best = deletion
            if insertion.distance < best.distance:
                best = insertion
            current.append(best)
        previous = current
    return previous[n_ref]


def _check_pairs(predictions: Sequence[str], references: Sequence[str]) -> None:
    if len(predictions) != len(references):
        raise MetricError(
            f"{len(predictions)} predictions but {len(references)} references"
        )
    if not references:
        raise MetricError("cannot score an empty batch")


def cer(predictions: Sequence[str], references: Sequence[str]) -> float:
    """Character error rate in percent, corpus-normalized."""
    _check_pairs(predictions, references)
    total_edits = 0
    total_length = 0
    for pred, ref in zip(predictions, references):
        if not ref:
            raise MetricError("empty reference string")
        total_edits += edit_distance(pred, ref).distance
        total_length += len(ref)
    return 100.0 * total_edits / total_length


def wer(predictions: Sequence[str], references: Sequence[str]) -> float:
    """Word error rate in percent over whitespace-split tokens."""
    _check_pairs(predictions, references)
    total_edits = 0
    total_length = 0
    for pred, ref in zip(predictions, references):
        ref_words = ref.split()
        if not ref_words:
            raise MetricError("reference contains no words")
        total_edits += edit_distance(pred.split(), ref_words).distance
        total_length += len(ref_words)
    return 100.0 * total_edits / total_length


@dataclass(frozen=True)
class PerSampleScore:
    id: str
    char_edits: int
    ref_len: int


@dataclass(frozen=True)
class EvalReport:
    """Corpus-level scores plus the character operation breakdown."""

    cer: float
    wer: float
    n_samples: int
    substitutions: int
    deletions: int
    insertions: int
    per_sample: tuple[PerSampleScore, ...] | None = None

    def to_dict(self) -> dict:
        payload: dict = {
            "cer": self.cer,
            "wer": self.wer,
            "n_samples": self.n_samples,
            "substitutions": self.substitutions,
            "deletions": self.deletions,
            "insertions": self.insertions,
        }
        if self.per_sample is not None:
            payload["per_sample"] = [
                {"id": row.id, "char_edits": row.char_edits, "ref_len": row.ref_len}
                for row in self.per_sample
            ]
        return payload


def evaluate(
    predictions: Sequence[str],
    references: Sequence[str],
    ids: Sequence[str] | None = None,
    *,
    per_sample: bool = False,
) -> EvalReport:
    """Score a batch of prediction/reference string pairs."""
    _check_pairs(predictions, references)
    if ids is not None and len(ids) != len(references):
        raise MetricError(f"{len(ids)} ids but {len(references)} references")
    substitutions = deletions = insertions = 0
    rows: list[PerSampleScore] = []
    for index, (pred, ref) in enumerate(zip(predictions, references)):
        if not ref:
            raise MetricError("empty reference string")
        ops = edit_distance(pred, ref)
        substitutions += ops.substitutions
        deletions += ops.deletions
        insertions += ops.insertions
        if per_sample:
            sample_id = ids[index] if ids is not None else str(index)
            rows.append(PerSampleScore(sample_id, ops.distance, len(ref)))
    return EvalReport(
        cer=cer(predictions, references),
        wer=wer(predictions, references),
        n_samples=len(references),
        substitutions=substitutions,
        deletions=deletions,
        insertions=insertions,
        per_sample=tuple(rows) if per_sample else None,
    )


@dataclass(frozen=True)
class TokenUsageTable:
    """Percentage of emitted tokens per character-length bucket."""

    percentages: dict[str, float] = field(default_factory=dict)
    total_tokens: int = 0

    def csv_rows(self) -> list[tuple[str, float]]:
        return [(bucket, self.percentages[bucket]) for bucket in USAGE_BUCKETS]


def _bucket_of(length: int) -> str:
    return str(length) if length < 5 else "5+"


def token_usage(model: TokenizerModel, labels: Sequence[str]) -> TokenUsageTable:
    """Bucket every token occurrence emitted for ``labels`` by its character
    length. Percentages sum to 100 whenever any token is emitted."""
    counts: Counter[str] = Counter()
    total = 0
    id_to_text = model.id_to_text
    for label in labels:
        for tid in encode(model, label):
            counts[_bucket_of(len(id_to_text[tid]))] += 1
            total += 1
    if total == 0:
        return TokenUsageTable(
            percentages={bucket: 0.0 for bucket in USAGE_BUCKETS}, total_tokens=0
        )
    percentages = {
        bucket: 100.0 * counts.get(bucket, 0) / total for bucket in USAGE_BUCKETS
    }
    return TokenUsageTable(percentages=percentages, total_tokens=total)
