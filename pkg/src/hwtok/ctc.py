"""CTC-side utilities: greedy decoding, exact loss, feasibility, logit files.

The recognizer itself lives outside this package; everything here operates on
its frame-level outputs. Class 0 is the blank. A logit matrix has one row per
frame and ``vocab_size + 1`` columns.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, Sequence

import numpy as np

from .corpus import Dataset, FoldSplit
from .errors import LogitFileError
from .tokenizer import TokenizerModel, encode

BLANK = 0
LOGIT_MAGIC = b"CTCL"
LOGIT_VERSION = 1
_HEADER = struct.Struct("<4sIII")


def as_logit_matrix(matrix) -> np.ndarray:
    """Validate and return a (frames x classes) float array."""
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"logit matrix must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError("logit matrix needs at least one frame")
    if arr.shape[1] < 2:
        raise ValueError("logit matrix needs the blank plus at least one class")
    if not np.isfinite(arr).all():
        raise ValueError("logit matrix contains non-finite values")
    return arr


def greedy_decode(logits) -> list[int]:
    """Best-path decoding: frame-wise argmax, collapse repeats, drop blanks.

    Argmax ties resolve to the lowest class index (numpy's convention).
    """
    arr = as_logit_matrix(logits)
    path = np.argmax(arr, axis=1)
    return list(collapse_path(path.tolist()))


def collapse_path(path: Sequence[int]) -> tuple[int, ...]:
    """Collapse repeats then drop blanks; the CTC many-to-one path mapping."""
    out: list[int] = []
    previous = -1
    for cls in path:
        if cls != previous and cls != BLANK:
            out.append(cls)
        previous = cls
    return tuple(out)


def _check_target(target: Sequence[int], n_classes: int) -> None:
    for tid in target:
        if not isinstance(tid, (int, np.integer)) or isinstance(tid, bool):
            raise ValueError(f"target ids must be integers, got {tid!r}")
        if tid < 1 or tid >= n_classes:
            raise ValueError(
                f"target id {tid} outside valid range [1, {n_classes - 1}]"
            )


def min_frames(target: Sequence[int]) -> int:
    """Fewest frames that can emit the target: its length plus one extra
    blank-separated slot per adjacent repeated id."""
    repeats = sum(1 for i in range(1, len(target)) if target[i] == target[i - 1])
    return len(target) + repeats


def ctc_feasible(n_frames: int, target: Sequence[int]) -> bool:
    """Whether any frame path of the given length collapses to the target."""
    if n_frames < 0:
        raise ValueError(f"frame count must be non-negative, got {n_frames}")
    return n_frames >= min_frames(target)


def ctc_forward_nll(log_probs, target: Sequence[int]) -> float:
    """Exact negative log-likelihood of a target under per-frame distributions.

    ``log_probs`` is (frames x classes) with each row log-normalized; the sum
    runs over every frame path that collapses to the target, computed in the
    log domain with the usual blank-augmented forward recursion. Infeasible
    targets return ``inf``.
    """
    arr = as_logit_matrix(log_probs)
    row_mass = np.logaddexp.reduce(arr, axis=1)
    if not np.all(np.abs(row_mass) <= 1e-6):
        raise ValueError("each log_probs row must be a normalized log-distribution")
    _check_target(target, arr.shape[1])
    n_frames = arr.shape[0]
    if not ctc_feasible(n_frames, target):
        return math.inf
    if len(target) == 0:
        return float(-np.sum(arr[:, BLANK]))
    extended: list[int] = [BLANK]
    for tid in target:
        extended.append(int(tid))
        extended.append(BLANK)
    n_states = len(extended)
    alpha = np.full(n_states, -np.inf)
    alpha[0] = arr[0, BLANK]
    alpha[1] = arr[0, extended[1]]
    for t in range(1, n_frames):
        previous = alpha
        alpha = np.full(n_states, -np.inf)
        for s in range(n_states):
            acc = previous[s]
            if s >= 1:
                acc = np.logaddexp(acc, previous[s - 1])
            if s >= 2 and extended[s] != BLANK and extended[s] != extended[s - 2]:
                acc = np.logaddexp(acc, previous[s - 2])
            if acc != -np.inf:
                alpha[s] = acc + arr[t, extended[s]]
    total = np.logaddexp(alpha[-1], alpha[-2])
    return float(-total)


def feasibility_report(
    fold: FoldSplit,
    dataset: Dataset,
    model: TokenizerModel,
    frame_subsample: int = 1,
) -> float:
    """Fraction of the fold's training samples whose tokenized label cannot be
    emitted within the sample's (subsampled) frame count."""
    if frame_subsample < 1:
        raise ValueError(f"frame_subsample must be at least 1, got {frame_subsample}")
    train = dataset.subset(fold.train_ids)
    if not train:
        return 0.0
    infeasible = 0
    for sample in train:
        ids = encode(model, sample.label)
        n_frames = sample.frame_count // frame_subsample
        if not ctc_feasible(n_frames, ids):
            infeasible += 1
    return infeasible / len(train)


def write_logit_file(
    logit_path: str | Path,
    index_path: str | Path,
    entries: Iterable[tuple[str, np.ndarray]],
) -> dict[str, int]:
    """Write framed float32 logit records plus a JSONL id-to-offset index.

    Each record is the magic ``CTCL``, a format version, the frame and class
    counts as little-endian u32, then the row-major float32 matrix.
    """
    offsets: dict[str, int] = {}
    logit_path = Path(logit_path)
    index_path = Path(index_path)
    with logit_path.open("wb") as out, index_path.open("w", encoding="utf-8") as idx:
        for sample_id, matrix in entries:
            arr = np.ascontiguousarray(as_logit_matrix(matrix), dtype="<f4")
            if sample_id in offsets:
                raise LogitFileError(f"duplicate logit entry for id {sample_id!r}")
            offset = out.tell()
            offsets[sample_id] = offset
            out.write(_HEADER.pack(LOGIT_MAGIC, LOGIT_VERSION, arr.shape[0], arr.shape[1]))
            out.write(arr.tobytes(order="C"))
            idx.write(json.dumps({"id": sample_id, "offset": offset}) + "\n")
    return offsets


def load_logit_index(index_path: str | Path) -> dict[str, int]:
    """Read a JSONL index mapping sample id to byte offset."""
    index_path = Path(index_path)
    offsets: dict[str, int] = {}
    try:
        text = index_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LogitFileError(f"cannot read logit index {index_path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogitFileError(f"{index_path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(record, dict) or "id" not in record or "offset" not in record:
            raise LogitFileError(f"{index_path}:{lineno}: expected id and offset keys")
        sample_id, offset = record["id"], record["offset"]
        if not isinstance(sample_id, str) or not isinstance(offset, int) or offset < 0:
            raise LogitFileError(f"{index_path}:{lineno}: malformed index entry")
        if sample_id in offsets:
            raise LogitFileError(f"{index_path}:{lineno}: duplicate id {sample_id!r}")
        offsets[sample_id] = offset
    return offsets


def read_logit_entry(handle: BinaryIO, offset: int) -> np.ndarray:
    """Read one logit record at ``offset`` from an open binary file."""
    handle.seek(offset)
    header = handle.read(_HEADER.size)
    if len(header) != _HEADER.size:
        raise LogitFileError(f"truncated logit record header at offset {offset}")
    magic, version, n_frames, n_classes = _HEADER.unpack(header)
    if magic != LOGIT_MAGIC:
        raise LogitFileError(f"bad magic {magic!r} at offset {offset}")
    if version != LOGIT_VERSION:
        raise LogitFileError(f"unsupported logit record version {version}")
    if n_frames < 1 or n_classes < 2:
        raise LogitFileError(
            f"implausible record shape ({n_frames} x {n_classes}) at offset {offset}"
        )
    payload = handle.read(4 * n_frames * n_classes)
    if len(payload) != 4 * n_frames * n_classes:
        raise LogitFileError(f"truncated logit record payload at offset {offset}")
    arr = np.frombuffer(payload, dtype="<f4").reshape(n_frames, n_classes)
    return arr.astype(np.float64)


def iter_logit_entries(
    logit_path: str | Path, index: dict[str, int]
) -> Iterator[tuple[str, np.ndarray]]:
    """Yield (id, matrix) pairs for every index entry, in index order."""
    with Path(logit_path).open("rb") as handle:
        for sample_id, offset in index.items():
            yield sample_id, read_logit_entry(handle, offset)
