"""Sub-word tokenizers over label strings.

Four vocabulary kinds share one model container and one serialization format:

* ``char``: single characters only, the identity segmentation.
* ``bigram``: characters plus the most frequent adjacent character pairs.
* ``bpe``: byte-pair style vocabulary built by iteratively merging the most
  frequent adjacent symbol pair; encoding replays the merge list.
* ``unigram``: probabilistic vocabulary trained by EM over all segmentations
  with iterative pruning; encoding picks the max-likelihood segmentation.

Token ids start at 1. Id 0 is reserved for the CTC blank and never appears in
a vocabulary or in a serialized model.
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ModelFormatError, TokenizerError, UnknownSymbolError, VocabSizeError

BLANK_ID = 0
MODEL_VERSION = 1
KINDS = ("char", "bigram", "bpe", "unigram")


@dataclass(frozen=True)
class TokenizerModel:
    """A trained vocabulary plus whatever the kind needs to encode."""

    kind: str
    vocab: tuple[tuple[int, str], ...]
    alphabet: tuple[str, ...]
    merges: tuple[tuple[str, str], ...] = ()
    token_logp: dict[int, float] = field(default_factory=dict)

    @cached_property
    def text_to_id(self) -> dict[str, int]:
        return {text: tid for tid, text in self.vocab}

    @cached_property
    def id_to_text(self) -> dict[int, str]:
        return {tid: text for tid, text in self.vocab}

    @cached_property
    def logp_by_text(self) -> dict[str, float]:
        return {self.id_to_text[tid]: lp for tid, lp in self.token_logp.items()}

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @property
    def max_token_len(self) -> int:
        return max(len(text) for _, text in self.vocab)


def _alphabet_of(labels: Iterable[str]) -> tuple[str, ...]:
    chars: set[str] = set()
    for label in labels:
        chars.update(label)
    return tuple(sorted(chars))


def _check_labels(labels: Sequence[str]) -> None:
    if not labels:
        raise TokenizerError("cannot train on an empty label list")
    if not any(labels):
        raise TokenizerError("cannot train when every label is empty")


def _check_budget(vocab_size: int, alphabet: tuple[str, ...]) -> None:
    if vocab_size < len(alphabet):
        raise VocabSizeError(
            f"vocab size {vocab_size} is below the alphabet size {len(alphabet)}"
        )


def _make_vocab(alphabet: tuple[str, ...], extras: Iterable[str]) -> tuple[tuple[int, str], ...]:
    texts = list(alphabet) + list(extras)
    return tuple((i + 1, text) for i, text in enumerate(texts))


def train_char(labels: Sequence[str]) -> TokenizerModel:
    """Single-character vocabulary; the baseline identity segmentation."""
    _check_labels(labels)
    alphabet = _alphabet_of(labels)
    return TokenizerModel(kind="char", vocab=_make_vocab(alphabet, ()), alphabet=alphabet)


def train_bigram(labels: Sequence[str], vocab_size: int) -> TokenizerModel:
    """All single characters plus the most frequent adjacent character pairs.

    Pair occurrences are counted with a sliding window (overlaps allowed).
    Count ties rank lexicographically by pair text. The vocabulary is capped
    at ``vocab_size`` entries total, characters included.
    """
    _check_labels(labels)
    alphabet = _alphabet_of(labels)
    _check_budget(vocab_size, alphabet)
    pair_counts: Counter[str] = Counter()
    for label in labels:
        for i in range(len(label) - 1):
            pair_counts[label[i : i + 2]] += 1
    budget = vocab_size - len(alphabet)
    ranked = sorted(pair_counts.items(), key=lambda item: (-item[1], item[0]))
    extras = [pair for pair, _ in ranked[:budget]]
    return TokenizerModel(kind="bigram", vocab=_make_vocab(alphabet, extras), alphabet=alphabet)


def _count_adjacent_pairs(
    symbols: Sequence[str], weight: int, counts: Counter[tuple[str, str]]
) -> None:
    # Left-to-right non-overlapping occurrence counting: within a run of one
    # repeated symbol a merge can only apply floor(run/2) times.
    n = len(symbols)
    i = 0
    while i < n - 1:
        if symbols[i] == symbols[i + 1]:
            j = i
            while j < n - 1 and symbols[j + 1] == symbols[i]:
                j += 1
            run = j - i + 1
            counts[(symbols[i], symbols[i])] += (run // 2) * weight
            i = j
        else:
            counts[(symbols[i], symbols[i + 1])] += weight
            i += 1


def apply_merge(symbols: Sequence[str], left: str, right: str) -> list[str]:
    """Replace every left-to-right occurrence of the pair with one symbol."""
    out: list[str] = []
    i = 0
    n = len(symbols)
    while i < n:
        if i < n - 1 and symbols[i] == left and symbols[i + 1] == right:
            out.append(left + right)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return out


def train_bpe(labels: Sequence[str], vocab_size: int) -> TokenizerModel:
    """Iteratively merge the currently most frequent adjacent symbol pair.

    Pair counts are recomputed from the working corpus at every step. A merge
    requires at least two occurrences; count ties pick the lexicographically
    smallest (left, right) pair. Training stops when the vocabulary reaches
    ``vocab_size`` or no pair qualifies, whichever comes first.
    """
    _check_labels(labels)
    alphabet = _alphabet_of(labels)
    _check_budget(vocab_size, alphabet)
    word_counts = Counter(labels)
    sequences = [(list(word), count) for word, count in sorted(word_counts.items()) if word]
    vocab_texts = set(alphabet)
    merges: list[tuple[str, str]] = []
    extras: list[str] = []
    while len(vocab_texts) < vocab_size:
        counts: Counter[tuple[str, str]] = Counter()
        for symbols, weight in sequences:
            _count_adjacent_pairs(symbols, weight, counts)
        if not counts:
            break
        best_count = max(counts.values())
        if best_count < 2:
            break
        left, right = min(pair for pair, count in counts.items() if count == best_count)
        merges.append((left, right))
        product = left + right
        if product not in vocab_texts:
            vocab_texts.add(product)
            extras.append(product)
        sequences = [(apply_merge(symbols, left, right), weight) for symbols, weight in sequences]
    return TokenizerModel(
        kind="bpe",
        vocab=_make_vocab(alphabet, extras),
        alphabet=alphabet,
        merges=tuple(merges),
    )


@dataclass(frozen=True)
class UnigramConfig:
    """Knobs for unigram training; the defaults suit small label corpora."""

    max_candidate_len: int = 8
    min_count: int = 2
    em_rounds: int = 2
    prune_fraction: float = 0.2

    def __post_init__(self) -> None:
        if self.max_candidate_len < 1:
            raise TokenizerError("max_candidate_len must be at least 1")
        if self.min_count < 1:
            raise TokenizerError("min_count must be at least 1")
        if self.em_rounds < 0:
            raise TokenizerError("em_rounds must be non-negative")
        if not 0.0 < self.prune_fraction <= 1.0:
            raise TokenizerError("prune_fraction must be in (0, 1]")


def _substring_counts(word_counts: Counter[str], max_len: int) -> Counter[str]:
    counts: Counter[str] = Counter()
    for word, freq in word_counts.items():
        n = len(word)
        for i in range(n):
            for j in range(i + 1, min(i + max_len, n) + 1):
                counts[word[i:j]] += freq
    return counts


def _forward_scores(word: str, probs: dict[str, float], max_len: int) -> list[float]:
    n = len(word)
    alpha = [0.0] * (n + 1)
    alpha[0] = 1.0
    for j in range(1, n + 1):
        total = 0.0
        for i in range(max(0, j - max_len), j):
            if alpha[i] == 0.0:
                continue
            p = probs.get(word[i:j])
            if p:
                total += alpha[i] * p
        alpha[j] = total
    return alpha


def _backward_scores(word: str, probs: dict[str, float], max_len: int) -> list[float]:
    n = len(word)
    beta = [0.0] * (n + 1)
    beta[n] = 1.0
    for i in range(n - 1, -1, -1):
        total = 0.0
        for j in range(i + 1, min(i + max_len, n) + 1):
            if beta[j] == 0.0:
                continue
            p = probs.get(word[i:j])
            if p:
                total += p * beta[j]
        beta[i] = total
    return beta


def _expected_counts(
    word_counts: Counter[str], probs: dict[str, float]
) -> tuple[dict[str, float], float]:
    """E-step: expected token counts and the corpus log-likelihood."""
    max_len = max(len(t) for t in probs)
    expected: dict[str, float] = defaultdict(float)
    log_likelihood = 0.0
    for word, freq in word_counts.items():
        if not word:
            continue
        n = len(word)
        alpha = _forward_scores(word, probs, max_len)
        beta = _backward_scores(word, probs, max_len)
        total = alpha[n]
        if total <= 0.0:
            raise TokenizerError(f"word {word!r} has no segmentation under the vocabulary")
        log_likelihood += freq * math.log(total)
        for i in range(n):
            if alpha[i] == 0.0:
                continue
            for j in range(i + 1, min(i + max_len, n) + 1):
                p = probs.get(word[i:j])
                if p and beta[j] > 0.0:
                    expected[word[i:j]] += freq * alpha[i] * p * beta[j] / total
    return expected, log_likelihood


def corpus_log_likelihood(word_counts: Counter[str], probs: dict[str, float]) -> float:
    """Log-likelihood of the corpus summed over all segmentations per word."""
    max_len = max(len(t) for t in probs)
    total = 0.0
    for word, freq in word_counts.items():
        if not word:
            continue
        marginal = _forward_scores(word, probs, max_len)[len(word)]
        if marginal <= 0.0:
            raise TokenizerError(f"word {word!r} has no segmentation under the vocabulary")
        total += freq * math.log(marginal)
    return total


# Redundant tokens (for example a character always covered by longer tokens)
# see their expected count square toward zero each round and would underflow
# to exactly 0.0 after a few dozen rounds, killing every later E-step. The
# floor keeps them alive at a mass far below any tolerance in use.
_PROB_FLOOR = 1e-100


def unigram_em(
    word_counts: Counter[str], probs: dict[str, float], rounds: int
) -> tuple[dict[str, float], list[float]]:
    """Run EM rounds; returns updated probabilities and the log-likelihood
    measured before each round (non-decreasing across rounds)."""
    history: list[float] = []
    for _ in range(rounds):
        expected, log_likelihood = _expected_counts(word_counts, probs)
        history.append(log_likelihood)
        total = sum(expected.values())
        updated = {
            token: max(expected.get(token, 0.0), _PROB_FLOOR * total)
            for token in probs
        }
        norm = sum(updated.values())
        probs = {token: count / norm for token, count in updated.items()}
    return probs, history


def _best_logp_without(text: str, probs: dict[str, float], excluded: str) -> float:
    """Max log-prob segmentation of ``text`` that never uses ``excluded`` itself."""
    n = len(text)
    max_len = max(len(t) for t in probs)
    best = [-math.inf] * (n + 1)
    best[0] = 0.0
    for j in range(1, n + 1):
        for i in range(max(0, j - max_len), j):
            if best[i] == -math.inf:
                continue
            piece = text[i:j]
            if piece == excluded:
                continue
            p = probs.get(piece)
            if p:
                score = best[i] + math.log(p)
                if score > best[j]:
                    best[j] = score
    return best[n]


def train_unigram(
    labels: Sequence[str], vocab_size: int, config: UnigramConfig | None = None
) -> TokenizerModel:
    """Probabilistic segmentation vocabulary trained by EM with pruning.

    Seeds with every substring of length at most ``max_candidate_len`` seen at
    least ``min_count`` times (single characters are kept unconditionally),
    with probabilities proportional to raw substring counts. While the
    vocabulary exceeds ``vocab_size``: run ``em_rounds`` EM rounds, then drop
    the ``prune_fraction`` of multi-character tokens whose removal costs the
    corpus likelihood least. Characters are never pruned. A vocabulary already
    within budget is returned as seeded, without any EM update.
    """
    if config is None:
        config = UnigramConfig()
    _check_labels(labels)
    alphabet = _alphabet_of(labels)
    _check_budget(vocab_size, alphabet)
    word_counts = Counter(label for label in labels if label)
    sub_counts = _substring_counts(word_counts, config.max_candidate_len)
    seeds = {
        text: count
        for text, count in sub_counts.items()
        if len(text) == 1 or count >= config.min_count
    }
    total = sum(seeds.values())
    probs = {text: count / total for text, count in sorted(seeds.items())}
    while len(probs) > vocab_size:
        probs, _ = unigram_em(word_counts, probs, config.em_rounds)
        expected, _ = _expected_counts(word_counts, probs)
        multi = [t for t in probs if len(t) > 1]
        losses = {}
        for token in multi:
            alt = _best_logp_without(token, probs, token)
            losses[token] = expected.get(token, 0.0) * (math.log(probs[token]) - alt)
        n_drop = min(max(1, int(len(multi) * config.prune_fraction)), len(probs) - vocab_size)
        for token in sorted(multi, key=lambda t: (losses[t], t))[:n_drop]:
            del probs[token]
        remaining = sum(probs.values())
        probs = {t: p / remaining for t, p in probs.items()}
    extras = sorted(t for t in probs if len(t) > 1)
    vocab = _make_vocab(alphabet, extras)
    token_logp = {tid: math.log(probs[text]) for tid, text in vocab}
    return TokenizerModel(
        kind="unigram", vocab=vocab, alphabet=alphabet, token_logp=token_logp
    )


def train(
    kind: str,
    labels: Sequence[str],
    vocab_size: int,
    config: UnigramConfig | None = None,
) -> TokenizerModel:
    """Train a tokenizer of the given kind; dispatcher used by the CLI."""
    if kind == "char":
        return train_char(labels)
    if kind == "bigram":
        return train_bigram(labels, vocab_size)
    if kind == "bpe":
        return train_bpe(labels, vocab_size)
    if kind == "unigram":
        return train_unigram(labels, vocab_size, config)
    raise TokenizerError(f"unknown tokenizer kind {kind!r}, expected one of {KINDS}")


def _viterbi_segment(
    text: str, logp_by_text: dict[str, float], max_len: int
) -> list[str]:
    """Max log-prob segmentation; ties prefer fewer tokens, then the
    lexicographically smallest token sequence."""
    n = len(text)
    best: list[tuple[float, int, tuple[str, ...]] | None] = [None] * (n + 1)
    best[0] = (0.0, 0, ())
    for j in range(1, n + 1):
        winner: tuple[float, int, tuple[str, ...]] | None = None
        for i in range(max(0, j - max_len), j):
            state = best[i]
            if state is None:
                continue
            lp = logp_by_text.get(text[i:j])
            if lp is None:
                continue
            candidate = (state[0] + lp, state[1] + 1, state[2] + (text[i:j],))
            if winner is None:
                winner = candidate
            elif candidate[0] > winner[0]:
                winner = candidate
            elif candidate[0] == winner[0] and (candidate[1], candidate[2]) < (winner[1], winner[2]):
                winner = candidate
        best[j] = winner
    state = best[n]
    if state is None:
        raise TokenizerError(f"no segmentation for {text!r}")
    return list(state[2])


def encode(model: TokenizerModel, text: str) -> list[int]:
    """Segment ``text`` into token ids under the model's policy.

    Raises :class:`UnknownSymbolError` naming the first character outside the
    model alphabet. Empty text encodes to an empty sequence.
    """
    known = set(model.alphabet)
    for offset, ch in enumerate(text):
        if ch not in known:
            raise UnknownSymbolError(ch, offset)
    if not text:
        return []
    text_to_id = model.text_to_id
    if model.kind == "char":
        return [text_to_id[ch] for ch in text]
    if model.kind == "bigram":
        ids: list[int] = []
        i = 0
        while i < len(text):
            pair = text[i : i + 2]
            if len(pair) == 2 and pair in text_to_id:
                ids.append(text_to_id[pair])
                i += 2
            else:
                ids.append(text_to_id[text[i]])
                i += 1
        return ids
    if model.kind == "bpe":
        symbols: list[str] = list(text)
        for left, right in model.merges:
            if len(symbols) < 2:
                break
            symbols = apply_merge(symbols, left, right)
        return [text_to_id[s] for s in symbols]
    if model.kind == "unigram":
        pieces = _viterbi_segment(text, model.logp_by_text, model.max_token_len)
        return [text_to_id[piece] for piece in pieces]
    raise TokenizerError(f"unknown tokenizer kind {model.kind!r}")


def decode_tokens(model: TokenizerModel, ids: Sequence[int]) -> str:
    """Concatenate the token texts for ``ids``; unknown ids are an error."""
    id_to_text = model.id_to_text
    pieces = []
    for tid in ids:
        if tid not in id_to_text:
            raise TokenizerError(f"unknown token id {tid}")
        pieces.append(id_to_text[tid])
    return "".join(pieces)


def save_model(model: TokenizerModel, path: str | Path) -> None:
    """Serialize a model to JSON. Identical models produce identical bytes."""
    payload: dict = {
        "version": MODEL_VERSION,
        "kind": model.kind,
        "alphabet": list(model.alphabet),
        "vocab": [{"id": tid, "text": text} for tid, text in model.vocab],
    }
    if model.kind == "bpe":
        payload["merges"] = [[left, right] for left, right in model.merges]
    if model.kind == "unigram":
        payload["logp"] = {str(tid): lp for tid, lp in sorted(model.token_logp.items())}
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ModelFormatError(message)


def load_model(path: str | Path) -> TokenizerModel:
    """Read a serialized model back, validating the schema strictly."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ModelFormatError(f"cannot read model {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: invalid JSON: {exc}") from exc
    _require(isinstance(payload, dict), f"{path}: model file must be an object")
    _require(payload.get("version") == MODEL_VERSION,
             f"{path}: unsupported model version {payload.get('version')!r}")
    kind = payload.get("kind")
    _require(kind in KINDS, f"{path}: unknown kind {kind!r}")
    raw_vocab = payload.get("vocab")
    _require(isinstance(raw_vocab, list) and raw_vocab, f"{path}: vocab must be a non-empty list")
    vocab: list[tuple[int, str]] = []
    seen_ids: set[int] = set()
    seen_texts: set[str] = set()
    for entry in raw_vocab:
        _require(isinstance(entry, dict) and "id" in entry and "text" in entry,
                 f"{path}: each vocab entry needs id and text")
        tid, text = entry["id"], entry["text"]
        _require(isinstance(tid, int) and not isinstance(tid, bool),
                 f"{path}: token id must be an integer")
        _require(tid != 0, f"{path}: token id 0 is reserved for the blank")
        _require(tid > 0, f"{path}: token id {tid} must be positive")
        _require(isinstance(text, str) and text, f"{path}: token text must be non-empty")
        _require(tid not in seen_ids, f"{path}: duplicate token id {tid}")
        _require(text not in seen_texts, f"{path}: duplicate token text {text!r}")
        seen_ids.add(tid)
        seen_texts.add(text)
        vocab.append((tid, text))
    _require(seen_ids == set(range(1, len(vocab) + 1)),
             f"{path}: token ids must be contiguous from 1")
    raw_alphabet = payload.get("alphabet")
    _require(isinstance(raw_alphabet, list) and raw_alphabet,
             f"{path}: alphabet must be a non-empty list")
    _require(all(isinstance(ch, str) and len(ch) == 1 for ch in raw_alphabet),
             f"{path}: alphabet entries must be single characters")
    alphabet = tuple(raw_alphabet)
    _require(tuple(sorted(alphabet)) == alphabet, f"{path}: alphabet must be sorted")
    _require(all(ch in seen_texts for ch in alphabet),
             f"{path}: every alphabet character needs a single-character token")
    if kind == "char":
        _require(all(len(text) == 1 for _, text in vocab),
                 f"{path}: char models may only hold single-character tokens")
    if kind == "bigram":
        _require(all(len(text) <= 2 for _, text in vocab),
                 f"{path}: bigram models may only hold tokens up to two characters")
    merges: tuple[tuple[str, str], ...] = ()
    if kind == "bpe":
        raw_merges = payload.get("merges")
        _require(isinstance(raw_merges, list),
                 f"{path}: bpe models require a merges list")
        cleaned = []
        for pair in raw_merges:
            _require(isinstance(pair, list) and len(pair) == 2
                     and all(isinstance(side, str) and side for side in pair),
                     f"{path}: each merge must be a [left, right] string pair")
            cleaned.append((pair[0], pair[1]))
        merges = tuple(cleaned)
    else:
        _require("merges" not in payload, f"{path}: merges only belong to bpe models")
    token_logp: dict[int, float] = {}
    if kind == "unigram":
        raw_logp = payload.get("logp")
        _require(isinstance(raw_logp, dict), f"{path}: unigram models require a logp map")
        for key, value in raw_logp.items():
            try:
                tid = int(key)
            except ValueError:
                raise ModelFormatError(f"{path}: logp key {key!r} is not an integer") from None
            _require(tid in seen_ids, f"{path}: logp key {tid} is not a token id")
            _require(isinstance(value, (int, float)) and not isinstance(value, bool)
                     and math.isfinite(value) and value <= 0.0,
                     f"{path}: logp values must be finite non-positive numbers")
            token_logp[tid] = float(value)
        _require(set(token_logp) == seen_ids, f"{path}: logp must cover every token id")
        mass = sum(math.exp(lp) for lp in token_logp.values())
        _require(abs(mass - 1.0) <= 1e-6,
                 f"{path}: token probabilities sum to {mass}, expected 1")
    else:
        _require("logp" not in payload, f"{path}: logp only belongs to unigram models")
    return TokenizerModel(
        kind=kind,
        vocab=tuple(vocab),
        alphabet=alphabet,
        merges=merges,
        token_logp=token_logp,
    )
