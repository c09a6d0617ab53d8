"""Matplotlib rendering for the analysis reports.

Every figure is written straight to disk with the Agg backend. PNG metadata
that varies between runs (the writing library version) is stripped so repeated
runs produce identical bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .corpus import CharStat
from .metrics import USAGE_BUCKETS, TokenUsageTable

_PNG_METADATA = {"Software": None}
_DPI = 150


def _frequency(dist: Mapping[str, CharStat | float], ch: str) -> float:
    value = dist.get(ch, 0.0)
    if isinstance(value, CharStat):
        return value.frequency
    return float(value)


def save_char_distribution_figure(
    train_dist: Mapping[str, CharStat | float],
    val_dist: Mapping[str, CharStat | float],
    path: str | Path,
    title: str,
) -> None:
    """Grouped bars of per-character frequency for train vs validation."""
    chars = sorted(set(train_dist) | set(val_dist))
    x = np.arange(len(chars))
    fig, ax = plt.subplots(figsize=(max(6.0, 0.35 * len(chars)), 3.4))
    ax.bar(x - 0.2, [_frequency(train_dist, ch) for ch in chars], width=0.4, label="train")
    ax.bar(x + 0.2, [_frequency(val_dist, ch) for ch in chars], width=0.4, label="validation")
    ax.set_xticks(x)
    ax.set_xticklabels(chars)
    ax.set_ylabel("frequency")
    ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI, metadata=_PNG_METADATA)
    plt.close(fig)


def save_token_usage_figure(
    tables: Mapping[int, TokenUsageTable], path: str | Path, title: str
) -> None:
    """Grouped bars: token length share per vocabulary size."""
    sizes = sorted(tables)
    x = np.arange(len(USAGE_BUCKETS))
    width = 0.8 / max(1, len(sizes))
    fig, ax = plt.subplots(figsize=(7.0, 3.4))
    for position, size in enumerate(sizes):
        offsets = x - 0.4 + width * (position + 0.5)
        values = [tables[size].percentages[bucket] for bucket in USAGE_BUCKETS]
        ax.bar(offsets, values, width=width, label=f"V={size}")
    ax.set_xticks(x)
    ax.set_xticklabels(USAGE_BUCKETS)
    ax.set_xlabel("token length (characters)")
    ax.set_ylabel("share of emitted tokens (%)")
    ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI, metadata=_PNG_METADATA)
    plt.close(fig)


def save_feasibility_figure(
    rows: Sequence[tuple[int, float, float]], path: str | Path, title: str
) -> None:
    """Infeasible-sample fraction and mean token length against vocab size.

    ``rows`` holds (vocab_size, mean_token_chars, infeasible_fraction).
    """
    sizes = [row[0] for row in rows]
    mean_lengths = [row[1] for row in rows]
    fractions = [row[2] for row in rows]
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    ax.plot(sizes, fractions, marker="o", color="tab:red", label="infeasible fraction")
    ax.set_xlabel("vocabulary size")
    ax.set_ylabel("infeasible fraction", color="tab:red")
    ax.tick_params(axis="y", labelcolor="tab:red")
    ax.set_ylim(-0.02, 1.02)
    twin = ax.twinx()
    twin.plot(sizes, mean_lengths, marker="s", color="tab:blue", label="mean token length")
    twin.set_ylabel("mean token length (chars)", color="tab:blue")
    twin.tick_params(axis="y", labelcolor="tab:blue")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI, metadata=_PNG_METADATA)
    plt.close(fig)
