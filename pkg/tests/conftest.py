"""Shared synthetic-data builders for the test suite."""

from __future__ import annotations

import numpy as np

from hwtok import Dataset, make_sample

DEFAULT_ALPHABET = "abcdef"

# One line per contract-level criterion, filled in by test_acceptance and
# echoed after the run so the verdicts survive output capturing.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_words(
    rng: np.random.Generator,
    n_words: int,
    alphabet: str = DEFAULT_ALPHABET,
    min_len: int = 1,
    max_len: int = 8,
) -> list[str]:
    letters = list(alphabet)
    words = []
    for _ in range(n_words):
        length = int(rng.integers(min_len, max_len + 1))
        words.append("".join(rng.choice(letters, size=length)))
    return words


def make_dataset(
    rng: np.random.Generator,
    n_samples: int = 60,
    n_writers: int = 6,
    alphabet: str = DEFAULT_ALPHABET,
    min_len: int = 2,
    max_len: int = 8,
    channels: int = 3,
    frame_range: tuple[int, int] = (8, 24),
    n_distinct_labels: int | None = None,
) -> Dataset:
    """Random dataset with controllable writer and label diversity."""
    if n_distinct_labels is None:
        n_distinct_labels = max(4, n_samples // 3)
    labels = make_words(rng, n_distinct_labels, alphabet, min_len, max_len)
    samples = []
    for i in range(n_samples):
        label = labels[int(rng.integers(len(labels)))]
        writer = f"w{int(rng.integers(n_writers)):03d}"
        n_frames = int(rng.integers(frame_range[0], frame_range[1] + 1))
        signal = rng.normal(size=(n_frames, channels)).round(4).tolist()
        samples.append(make_sample(f"s{i:05d}", writer, label, signal))
    return Dataset.from_samples(samples)
