"""Concatenation augmentation: longer synthetic samples from same-writer joins.

A base sample is extended by appending the signals of ``n_concat`` other
samples from the same writer; the label is the join of the piece labels. When
a tokenizer is supplied the pieces are tokenized individually before the join
and the id sequences are concatenated, so the token stream never spans a piece
boundary. Selection is deterministic per (seed, epoch, base id) and does not
depend on pool ordering, which keeps per-epoch generation reproducible and
safe to parallelize.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

from .corpus import Dataset, FoldSplit, Sample
from .errors import AugmentError
from .tokenizer import TokenizerModel, encode

Signal = tuple[tuple[float, ...], ...]
PostProcess = Callable[[Signal], Signal]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class AugmentPlan:
    """How to build concatenated samples."""

    n_concat: int = 0
    seed: int = 0
    separator: str = ""
    with_replacement_fallback: bool = True

    def __post_init__(self) -> None:
        if self.n_concat < 0:
            raise AugmentError(f"n_concat must be non-negative, got {self.n_concat}")


@dataclass(frozen=True)
class AugmentedSample:
    """A concatenated sample plus the ids of its source pieces."""

    source_ids: tuple[str, ...]
    writer_id: str
    label: str
    signal: Signal
    token_ids: tuple[int, ...] | None = None

    @property
    def frame_count(self) -> int:
        return len(self.signal)


class _SplitMix64:
    """Tiny deterministic integer PRNG (splitmix64), independent of numpy."""

    def __init__(self, state: int) -> None:
        self._state = state & _MASK64

    def next_int(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return (z ^ (z >> 31)) & _MASK64

    def below(self, bound: int) -> int:
        # Rejection sampling keeps the draw unbiased for any bound.
        limit = (_MASK64 + 1) - ((_MASK64 + 1) % bound)
        while True:
            value = self.next_int()
            if value < limit:
                return value % bound


def _rng_for(seed: int, epoch: int, base_id: str) -> _SplitMix64:
    digest = hashlib.blake2b(
        f"{epoch}:{base_id}".encode("utf-8"),
        digest_size=8,
        key=(seed & _MASK64).to_bytes(8, "little"),
    ).digest()
    return _SplitMix64(int.from_bytes(digest, "little"))


def _pick_partners(
    eligible: Sequence[Sample], count: int, rng: _SplitMix64, allow_replacement: bool
) -> list[Sample]:
    if count == 0:
        return []
    if len(eligible) >= count:
        indices = list(range(len(eligible)))
        for i in range(count):  # partial Fisher-Yates, first `count` slots
            j = i + rng.below(len(indices) - i)
            indices[i], indices[j] = indices[j], indices[i]
        return [eligible[i] for i in indices[:count]]
    if not allow_replacement or not eligible:
        raise AugmentError(
            f"need {count} partner samples but only {len(eligible)} are eligible"
        )
    return [eligible[rng.below(len(eligible))] for _ in range(count)]


def concat_augment(
    base: Sample,
    pool: Iterable[Sample],
    plan: AugmentPlan,
    model: TokenizerModel | None = None,
    *,
    epoch: int = 0,
    postprocess: PostProcess | None = None,
) -> AugmentedSample:
    """Concatenate ``plan.n_concat`` same-writer partners onto ``base``.

    Partners come from ``pool`` restricted to the base's writer, excluding the
    base itself, and are drawn without replacement; if the eligible pool is
    too small and the plan allows it, the draw falls back to sampling with
    replacement. ``n_concat=0`` returns the base unchanged. ``postprocess``,
    when given, runs on the joined signal (an opaque caller-supplied hook; no
    filtering or normalization happens here).
    """
    eligible = sorted(
        (s for s in pool if s.writer_id == base.writer_id and s.id != base.id),
        key=lambda s: s.id,
    )
    rng = _rng_for(plan.seed, epoch, base.id)
    partners = _pick_partners(eligible, plan.n_concat, rng, plan.with_replacement_fallback)
    pieces = [base, *partners]
    label = plan.separator.join(piece.label for piece in pieces)
    signal: Signal = tuple(frame for piece in pieces for frame in piece.signal)
    if postprocess is not None:
        signal = postprocess(signal)
    token_ids: tuple[int, ...] | None = None
    if model is not None:
        ids: list[int] = []
        for piece in pieces:
            ids.extend(encode(model, piece.label))
        token_ids = tuple(ids)
    return AugmentedSample(
        source_ids=tuple(piece.id for piece in pieces),
        writer_id=base.writer_id,
        label=label,
        signal=signal,
        token_ids=token_ids,
    )


def augment_epoch(
    fold: FoldSplit,
    dataset: Dataset,
    plan: AugmentPlan,
    model: TokenizerModel | None = None,
    *,
    epoch: int = 0,
    postprocess: PostProcess | None = None,
) -> Iterator[AugmentedSample]:
    """Yield one augmented sample per training sample of the fold, in dataset
    order. Partners are drawn from the fold's training samples only."""
    train = dataset.subset(fold.train_ids)
    for base in train:
        yield concat_augment(
            base, train, plan, model, epoch=epoch, postprocess=postprocess
        )


def equivalent_epochs(n_concat: int) -> float:
    """Training-data multiplier of a concatenation level: each base sample
    contributes its own pass plus ``n_concat`` partner appearances."""
    if n_concat < 0:
        raise AugmentError(f"n_concat must be non-negative, got {n_concat}")
    return float(n_concat + 1)
