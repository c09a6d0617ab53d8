"""Dataset ingestion, group-aware fold splitting, and character statistics.

A dataset is a flat list of recordings. Each recording carries a writer id, a
text label, and a fixed-width multichannel signal (frames x channels). Fold
splitting groups samples either by label (writer-dependent protocol, ``wd``)
or by writer (writer-independent protocol, ``wi``) so that no group straddles
a train/validation boundary.
"""

from __future__ import annotations

import hashlib
import json
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple

from .errors import DatasetError, SplitError

PROTOCOLS = ("wd", "wi")

_MASK64 = (1 << 64) - 1


def _has_control_chars(text: str) -> bool:
    return any(unicodedata.category(ch) == "Cc" for ch in text)


@dataclass(frozen=True)
class Sample:
    """One recording: a writer, a text label, and a frames-x-channels signal."""

    id: str
    writer_id: str
    label: str
    signal: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        if not self.id:
            raise DatasetError("sample id must be a non-empty string")
        if not self.label:
            raise DatasetError(f"sample {self.id!r}: empty label")
        if _has_control_chars(self.label):
            raise DatasetError(f"sample {self.id!r}: label contains control characters")
        if len(self.signal) == 0:
            raise DatasetError(f"sample {self.id!r}: signal has no frames")
        width = len(self.signal[0])
        if width == 0:
            raise DatasetError(f"sample {self.id!r}: frames have zero channels")
        for t, frame in enumerate(self.signal):
            if len(frame) != width:
                raise DatasetError(
                    f"sample {self.id!r}: frame {t} has {len(frame)} channels, expected {width}"
                )
            for value in frame:
                if not math.isfinite(value):
                    raise DatasetError(f"sample {self.id!r}: non-finite value in frame {t}")

    @property
    def frame_count(self) -> int:
        return len(self.signal)

    @property
    def channel_count(self) -> int:
        return len(self.signal[0])


def make_sample(id: str, writer_id: str, label: str, signal: Iterable[Iterable[float]]) -> Sample:
    """Build a :class:`Sample` from any nested float iterable."""
    frames = tuple(tuple(float(v) for v in frame) for frame in signal)
    return Sample(id=id, writer_id=writer_id, label=label, signal=frames)


@dataclass(frozen=True)
class Dataset:
    """An immutable collection of samples with a uniform channel count."""

    samples: tuple[Sample, ...]
    channel_count: int
    alphabet: tuple[str, ...]

    @classmethod
    def from_samples(cls, samples: Iterable[Sample]) -> "Dataset":
        items = tuple(samples)
        seen: set[str] = set()
        for sample in items:
            if sample.id in seen:
                raise DatasetError(f"duplicate sample id {sample.id!r}")
            seen.add(sample.id)
        channels = items[0].channel_count if items else 0
        for sample in items:
            if sample.channel_count != channels:
                raise DatasetError(
                    f"sample {sample.id!r} has {sample.channel_count} channels, expected {channels}"
                )
        chars: set[str] = set()
        for sample in items:
            chars.update(sample.label)
        return cls(samples=items, channel_count=channels, alphabet=tuple(sorted(chars)))

    def __len__(self) -> int:
        return len(self.samples)

    def labels(self) -> list[str]:
        return [sample.label for sample in self.samples]

    @cached_property
    def by_id(self) -> dict[str, Sample]:
        return {sample.id: sample for sample in self.samples}

    def subset(self, ids: Iterable[str]) -> list[Sample]:
        """Samples whose id is in ``ids``, preserving dataset order."""
        wanted = set(ids)
        missing = wanted - set(self.by_id)
        if missing:
            raise DatasetError(f"unknown sample ids: {sorted(missing)[:5]}")
        return [sample for sample in self.samples if sample.id in wanted]


def load_dataset(path: str | Path, expected_channels: int | None = None) -> Dataset:
    """Read a dataset from a JSON-lines file.

    Each line is an object with keys ``id``, ``writer``, ``label`` and
    ``signal`` (a list of frames, each a list of finite floats). All frames in
    the file must share one channel count; the first record fixes it unless
    ``expected_channels`` is given. Errors name the offending line.
    """
    path = Path(path)
    samples: list[Sample] = []
    channels = expected_channels
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise DatasetError(f"{path}:{lineno}: expected an object")
        for key in ("id", "writer", "label", "signal"):
            if key not in record:
                raise DatasetError(f"{path}:{lineno}: missing key {key!r}")
        if (
            not isinstance(record["id"], str)
            or not isinstance(record["writer"], str)
            or not isinstance(record["label"], str)
        ):
            raise DatasetError(f"{path}:{lineno}: id, writer and label must be strings")
        raw_signal = record["signal"]
        if not isinstance(raw_signal, list) or not all(isinstance(f, list) for f in raw_signal):
            raise DatasetError(f"{path}:{lineno}: signal must be a list of frames")
        frames = []
        for frame in raw_signal:
            values = []
            for v in frame:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise DatasetError(f"{path}:{lineno}: signal values must be numbers")
                values.append(float(v))
            frames.append(tuple(values))
        try:
            sample = Sample(
                id=record["id"],
                writer_id=record["writer"],
                label=record["label"],
                signal=tuple(frames),
            )
        except DatasetError as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from exc
        if channels is None:
            channels = sample.channel_count
        elif sample.channel_count != channels:
            raise DatasetError(
                f"{path}:{lineno}: sample {sample.id!r} has {sample.channel_count} "
                f"channels, expected {channels}"
            )
        samples.append(sample)
    try:
        return Dataset.from_samples(samples)
    except DatasetError as exc:
        raise DatasetError(f"{path}: {exc}") from exc


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset as JSON lines (the same layout ``load_dataset`` reads)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as out:
        for sample in dataset.samples:
            record = {
                "id": sample.id,
                "writer": sample.writer_id,
                "label": sample.label,
                "signal": [list(frame) for frame in sample.signal],
            }
            out.write(json.dumps(record, ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class FoldSplit:
    """One train/validation partition of a dataset by sample id."""

    fold_index: int
    protocol: str
    train_ids: frozenset[str]
    val_ids: frozenset[str]


def _group_hash(key: str, seed: int) -> int:
    digest = hashlib.blake2b(
        key.encode("utf-8"),
        digest_size=8,
        key=(seed & _MASK64).to_bytes(8, "little"),
    ).digest()
    return int.from_bytes(digest, "little")


def _group_key(sample: Sample, protocol: str) -> str:
    return sample.writer_id if protocol == "wi" else sample.label


def split_folds(dataset: Dataset, protocol: str, k: int, seed: int) -> list[FoldSplit]:
    """Deterministic group-wise k-fold assignment.

    Groups (writers for ``wi``, distinct label strings for ``wd``) are hashed
    with the seed into folds. A rebalancing pass then moves groups from the
    currently largest fold to the smallest until fold sizes differ by at most
    one group, so the assignment stays stable under dataset reordering.
    """
    if protocol not in PROTOCOLS:
        raise SplitError(f"unknown protocol {protocol!r}, expected one of {PROTOCOLS}")
    if k < 1:
        raise SplitError(f"fold count must be positive, got {k}")
    groups: dict[str, list[str]] = {}
    for sample in dataset.samples:
        groups.setdefault(_group_key(sample, protocol), []).append(sample.id)
    if len(groups) < k:
        kind = "writers" if protocol == "wi" else "distinct labels"
        raise SplitError(f"need at least {k} {kind} for {k} folds, got {len(groups)}")
    fold_keys: list[list[str]] = [[] for _ in range(k)]
    for key in sorted(groups):
        fold_keys[_group_hash(key, seed) % k].append(key)
    # Rebalance group counts; moving the last-listed group from the largest
    # fold strictly decreases sum(size^2), so this terminates.
    while True:
        sizes = [len(keys) for keys in fold_keys]
        largest = sizes.index(max(sizes))
        smallest = sizes.index(min(sizes))
        if sizes[largest] - sizes[smallest] <= 1:
            break
        fold_keys[smallest].append(fold_keys[largest].pop())
    splits: list[FoldSplit] = []
    all_ids = frozenset(sample.id for sample in dataset.samples)
    for index in range(k):
        val_ids: set[str] = set()
        for key in fold_keys[index]:
            val_ids.update(groups[key])
        splits.append(
            FoldSplit(
                fold_index=index,
                protocol=protocol,
                train_ids=frozenset(all_ids - val_ids),
                val_ids=frozenset(val_ids),
            )
        )
    return splits


def save_folds(
    splits: list[FoldSplit], path: str | Path, *, k: int, seed: int
) -> None:
    """Write a fold assignment file: protocol, k, seed, and sorted id lists."""
    if not splits:
        raise SplitError("no folds to save")
    payload = {
        "protocol": splits[0].protocol,
        "k": k,
        "seed": seed,
        "folds": [
            {"train": sorted(split.train_ids), "val": sorted(split.val_ids)}
            for split in splits
        ],
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def load_folds(path: str | Path) -> tuple[list[FoldSplit], int, int]:
    """Read a fold assignment file; returns (splits, k, seed)."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise SplitError(f"cannot read folds file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SplitError(f"{path}: invalid JSON: {exc}") from exc
    for key in ("protocol", "k", "seed", "folds"):
        if key not in payload:
            raise SplitError(f"{path}: missing key {key!r}")
    protocol = payload["protocol"]
    if protocol not in PROTOCOLS:
        raise SplitError(f"{path}: unknown protocol {protocol!r}")
    k = payload["k"]
    folds = payload["folds"]
    if not isinstance(k, int) or not isinstance(payload["seed"], int):
        raise SplitError(f"{path}: k and seed must be integers")
    if not isinstance(folds, list) or len(folds) != k:
        raise SplitError(f"{path}: expected {k} folds, got {len(folds) if isinstance(folds, list) else type(folds).__name__}")
    splits = []
    for index, fold in enumerate(folds):
        if not isinstance(fold, dict) or "train" not in fold or "val" not in fold:
            raise SplitError(f"{path}: fold {index} must have train and val id lists")
        train = frozenset(fold["train"])
        val = frozenset(fold["val"])
        if train & val:
            raise SplitError(f"{path}: fold {index} has overlapping train and val ids")
        splits.append(
            FoldSplit(fold_index=index, protocol=protocol, train_ids=train, val_ids=val)
        )
    return splits, k, payload["seed"]


class CharStat(NamedTuple):
    count: int
    frequency: float


def char_distribution(labels: Iterable[str]) -> dict[str, CharStat]:
    """Character counts and relative frequencies over a list of labels."""
    counts: Counter[str] = Counter()
    for label in labels:
        counts.update(label)
    total = sum(counts.values())
    return {ch: CharStat(n, n / total) for ch, n in sorted(counts.items())}


class Divergence(NamedTuple):
    missing_in_val: frozenset[str]
    missing_in_train: frozenset[str]
    total_variation: float


def _frequency(dist: dict, ch: str) -> float:
    value = dist.get(ch, 0.0)
    if isinstance(value, CharStat):
        return value.frequency
    return float(value)


def distribution_divergence(train: dict, val: dict) -> Divergence:
    """Compare two character distributions.

    Returns the characters present on only one side and the total variation
    distance 0.5 * sum(|p_train - p_val|), which lies in [0, 1].
    """
    chars = sorted(set(train) | set(val))
    tv = 0.5 * sum(abs(_frequency(train, ch) - _frequency(val, ch)) for ch in chars)
    return Divergence(
        missing_in_val=frozenset(ch for ch in train if ch not in val),
        missing_in_train=frozenset(ch for ch in val if ch not in train),
        total_variation=tv,
    )
