"""Command line front end.

Subcommands cover the full pipeline: fold splitting, tokenizer training,
encoding/decoding, concatenation augmentation, scoring recognizer outputs,
and the corpus analysis report (delimited tables plus rendered figures).

Every run directory gets a ``manifest.json`` written last, listing each
artifact with its SHA-256 so downstream consumers can verify completeness.
Exit codes: 0 success, 2 for bad input or usage, 1 for unexpected failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import traceback
from pathlib import Path
from typing import Sequence

from . import __version__
from .augment import AugmentPlan, augment_epoch
from .corpus import (
    Dataset,
    FoldSplit,
    char_distribution,
    distribution_divergence,
    load_dataset,
    save_folds,
    split_folds,
)
from .ctc import greedy_decode, load_logit_index, read_logit_entry
from .errors import ConfigError, LogitFileError, PipelineError, TokenizerError
from .metrics import evaluate, token_usage
from .tokenizer import (
    KINDS,
    TokenizerModel,
    UnigramConfig,
    decode_tokens,
    encode,
    load_model,
    save_model,
    train,
)
from . import ctc as ctc_mod

# Training setup of the reference recognizer, recorded in manifests for
# provenance. The recognizer itself is out of scope for this package.
RECOGNIZER_TRAINING_REFERENCE = {
    "epochs": 300,
    "batch_size": 64,
    "warmup_epochs": 30,
    "learning_rate": 0.001,
    "lr_schedule": "cosine_annealing",
    "optimizer": "adamw",
    "weight_decay": 0.01,
}

_DEFAULTS: dict = {
    "dataset": None,
    "protocol": "wd",
    "folds": 5,
    "fold": None,
    "seed": 0,
    "tokenizer": "bigram",
    "vocab_sizes": [100, 200, 300, 400, 500],
    "concat": 0,
    "separator": "",
    "epoch": 0,
    "frame_subsample": 1,
    "figures": True,
    "max_candidate_len": 8,
    "min_count": 2,
    "em_rounds": 2,
    "prune_fraction": 0.2,
}

_CONFIG_TYPES: dict[str, type | tuple] = {
    "dataset": str,
    "protocol": str,
    "folds": int,
    "fold": int,
    "seed": int,
    "tokenizer": str,
    "vocab_sizes": list,
    "concat": int,
    "separator": str,
    "epoch": int,
    "frame_subsample": int,
    "figures": bool,
    "max_candidate_len": int,
    "min_count": int,
    "em_rounds": int,
    "prune_fraction": (int, float),
}


def _load_config_file(path: str) -> dict:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    for key, value in payload.items():
        if key not in _CONFIG_TYPES:
            raise ConfigError(f"{path}: unknown config key {key!r}")
        expected = _CONFIG_TYPES[key]
        if isinstance(value, bool) and expected is not bool:
            raise ConfigError(f"{path}: config key {key!r} has the wrong type")
        if not isinstance(value, expected):
            raise ConfigError(f"{path}: config key {key!r} has the wrong type")
    if "vocab_sizes" in payload:
        sizes = payload["vocab_sizes"]
        if not sizes or not all(isinstance(v, int) and not isinstance(v, bool) for v in sizes):
            raise ConfigError(f"{path}: vocab_sizes must be a non-empty integer list")
    return payload


class Settings:
    """Resolved options: command line flags win over the config file, which
    wins over the built-in defaults."""

    def __init__(self, args: argparse.Namespace) -> None:
        self._args = args
        self._config = _load_config_file(args.config) if getattr(args, "config", None) else {}

    def get(self, name: str):
        value = getattr(self._args, name, None)
        if value is not None:
            return value
        if name in self._config:
            return self._config[name]
        return _DEFAULTS[name]

    def require(self, name: str):
        value = self.get(name)
        if value is None:
            raise ConfigError(f"missing required option --{name.replace('_', '-')}")
        return value

    def unigram_config(self) -> UnigramConfig:
        return UnigramConfig(
            max_candidate_len=self.get("max_candidate_len"),
            min_count=self.get("min_count"),
            em_rounds=self.get("em_rounds"),
            prune_fraction=self.get("prune_fraction"),
        )


def _parse_sizes(raw: str) -> list[int]:
    try:
        sizes = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad vocab size list {raw!r}") from None
    if not sizes:
        raise argparse.ArgumentTypeError("vocab size list is empty")
    return sizes


class OutputTracker:
    """Collects written artifacts so the manifest can be written last."""

    def __init__(self, out_dir: str | Path) -> None:
        self.root = Path(out_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self.artifacts: list[tuple[str, str, int]] = []

    def path(self, relative: str) -> Path:
        target = self.root / relative
        target.parent.mkdir(parents=True, exist_ok=True)
        return target

    def record(self, relative: str) -> None:
        target = self.root / relative
        digest = hashlib.sha256(target.read_bytes()).hexdigest()
        self.artifacts.append((relative, digest, target.stat().st_size))

    def write_text(self, relative: str, text: str) -> None:
        self.path(relative).write_text(text, encoding="utf-8")
        self.record(relative)

    def write_manifest(self, command: str, config: dict) -> None:
        payload = {
            "command": command,
            "version": __version__,
            "config": config,
            "artifacts": [
                {"path": rel, "sha256": digest, "bytes": size}
                for rel, digest, size in sorted(self.artifacts)
            ],
            "recognizer_training_reference": RECOGNIZER_TRAINING_REFERENCE,
        }
        (self.root / "manifest.json").write_text(
            json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )


def _resolve_folds(settings: Settings, dataset: Dataset) -> tuple[list[FoldSplit], int, int]:
    protocol = settings.get("protocol")
    k = settings.get("folds")
    seed = settings.get("seed")
    if k < 2:
        raise ConfigError(f"fold count must be at least 2, got {k}")
    return split_folds(dataset, protocol, k, seed), k, seed


def _selected_folds(settings: Settings, splits: list[FoldSplit]) -> list[FoldSplit]:
    fold = settings.get("fold")
    if fold is None:
        return splits
    if not 0 <= fold < len(splits):
        raise ConfigError(f"fold {fold} out of range for {len(splits)} folds")
    return [splits[fold]]


def _write_csv(tracker: OutputTracker, relative: str, header: Sequence[str], rows) -> None:
    target = tracker.path(relative)
    with target.open("w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out)
        writer.writerow(header)
        writer.writerows(rows)
    tracker.record(relative)


def cmd_split(args: argparse.Namespace) -> None:
    settings = Settings(args)
    dataset = load_dataset(settings.require("dataset"))
    splits, k, seed = _resolve_folds(settings, dataset)
    tracker = OutputTracker(settings.require("out"))
    save_folds(splits, tracker.path("folds.json"), k=k, seed=seed)
    tracker.record("folds.json")
    tracker.write_manifest(
        "split",
        {
            "dataset": str(settings.get("dataset")),
            "protocol": settings.get("protocol"),
            "folds": k,
            "seed": seed,
        },
    )
    print(f"wrote {k} {settings.get('protocol')} folds to {tracker.root / 'folds.json'}")


def _read_label_file(path: str) -> list[str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read label file {path}: {exc}") from exc
    return [line for line in text.splitlines() if line]


def cmd_train_tokenizer(args: argparse.Namespace) -> None:
    settings = Settings(args)
    kind = settings.get("tokenizer")
    if kind not in KINDS:
        raise ConfigError(f"unknown tokenizer kind {kind!r}, expected one of {KINDS}")
    tracker = OutputTracker(settings.require("out"))
    unigram_config = settings.unigram_config()
    sizes = settings.get("vocab_sizes")
    trained: list[str] = []
    if args.labels is not None:
        labels = _read_label_file(args.labels)
        for size in sizes:
            model = train(kind, labels, size, unigram_config)
            relative = f"models/{kind}_v{size}.json"
            save_model(model, tracker.path(relative))
            tracker.record(relative)
            trained.append(relative)
    else:
        dataset = load_dataset(settings.require("dataset"))
        splits, _, _ = _resolve_folds(settings, dataset)
        for split in _selected_folds(settings, splits):
            labels = [s.label for s in dataset.subset(split.train_ids)]
            for size in sizes:
                model = train(kind, labels, size, unigram_config)
                relative = (
                    f"models/{kind}_{split.protocol}_f{split.fold_index}_v{size}.json"
                )
                save_model(model, tracker.path(relative))
                tracker.record(relative)
                trained.append(relative)
    tracker.write_manifest(
        "train-tokenizer",
        {
            "tokenizer": kind,
            "vocab_sizes": sizes,
            "labels": args.labels,
            "dataset": settings.get("dataset") and str(settings.get("dataset")),
            "protocol": settings.get("protocol"),
            "folds": settings.get("folds"),
            "fold": settings.get("fold"),
            "seed": settings.get("seed"),
        },
    )
    for relative in trained:
        print(f"trained {relative}")


def cmd_encode(args: argparse.Namespace) -> None:
    model = load_model(args.model)
    try:
        text = Path(args.input).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read input {args.input}: {exc}") from exc
    lines = text.splitlines()
    encoded = []
    for lineno, line in enumerate(lines, start=1):
        try:
            ids = encode(model, line)
        except TokenizerError as exc:
            raise TokenizerError(f"{args.input}:{lineno}: {exc}") from exc
        encoded.append(" ".join(str(tid) for tid in ids))
    output = "".join(row + "\n" for row in encoded)
    Path(args.output).write_text(output, encoding="utf-8")
    print(f"encoded {len(lines)} lines to {args.output}")


def cmd_decode(args: argparse.Namespace) -> None:
    if args.input is None and args.logits is None:
        raise ConfigError("decode needs either --input or --logits with --index")
    if args.input is not None:
        model = load_model(args.model) if args.model else None
        if model is None:
            raise ConfigError("decoding token id lines requires --model")
        try:
            text = Path(args.input).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read input {args.input}: {exc}") from exc
        lines = text.splitlines()
        decoded = []
        for lineno, line in enumerate(lines, start=1):
            try:
                ids = [int(part) for part in line.split()]
            except ValueError:
                raise TokenizerError(
                    f"{args.input}:{lineno}: token id lines must hold integers"
                ) from None
            decoded.append(decode_tokens(model, ids))
        Path(args.output).write_text("".join(row + "\n" for row in decoded), encoding="utf-8")
        print(f"decoded {len(lines)} lines to {args.output}")
        return
    if args.index is None:
        raise ConfigError("--logits requires --index")
    model = load_model(args.model) if args.model else None
    index = load_logit_index(args.index)
    rows = []
    with Path(args.logits).open("rb") as handle:
        for sample_id, offset in index.items():
            matrix = read_logit_entry(handle, offset)
            if model is not None and matrix.shape[1] != model.vocab_size + 1:
                raise LogitFileError(
                    f"logit record {sample_id!r} has {matrix.shape[1]} classes, "
                    f"expected {model.vocab_size + 1}"
                )
            ids = greedy_decode(matrix)
            record: dict = {"id": sample_id, "token_ids": ids}
            if model is not None:
                record["text"] = decode_tokens(model, ids)
            rows.append(record)
    with Path(args.output).open("w", encoding="utf-8") as out:
        for record in rows:
            out.write(json.dumps(record, ensure_ascii=False) + "\n")
    print(f"decoded {len(rows)} logit records to {args.output}")


def cmd_augment(args: argparse.Namespace) -> None:
    settings = Settings(args)
    dataset = load_dataset(settings.require("dataset"))
    splits, k, seed = _resolve_folds(settings, dataset)
    fold = settings.get("fold")
    if fold is None:
        fold = 0
    if not 0 <= fold < k:
        raise ConfigError(f"fold {fold} out of range for {k} folds")
    split = splits[fold]
    plan = AugmentPlan(
        n_concat=settings.get("concat"),
        seed=seed,
        separator=settings.get("separator"),
    )
    model = load_model(args.model) if args.model else None
    epoch = settings.get("epoch")
    tracker = OutputTracker(settings.require("out"))
    relative = f"augmented_{split.protocol}_f{fold}_e{epoch}.jsonl"
    count = 0
    with tracker.path(relative).open("w", encoding="utf-8") as out:
        for sample in augment_epoch(split, dataset, plan, model, epoch=epoch):
            record = {
                "id": sample.source_ids[0],
                "writer": sample.writer_id,
                "label": sample.label,
                "signal": [list(frame) for frame in sample.signal],
                "sources": list(sample.source_ids),
            }
            if sample.token_ids is not None:
                record["token_ids"] = list(sample.token_ids)
            out.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    tracker.record(relative)
    tracker.write_manifest(
        "augment",
        {
            "dataset": str(settings.get("dataset")),
            "protocol": split.protocol,
            "folds": k,
            "fold": fold,
            "seed": seed,
            "concat": plan.n_concat,
            "separator": plan.separator,
            "epoch": epoch,
            "model": args.model,
        },
    )
    print(f"wrote {count} augmented samples to {tracker.root / relative}")


def _read_reference_file(path: str) -> tuple[list[str], list[str]]:
    """Read a JSONL file with id and label keys; returns (ids, labels)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read references {path}: {exc}") from exc
    ids: list[str] = []
    labels: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(record, dict) or "id" not in record or "label" not in record:
            raise ConfigError(f"{path}:{lineno}: expected id and label keys")
        ids.append(record["id"])
        labels.append(record["label"])
    if not ids:
        raise ConfigError(f"{path}: no reference records")
    return ids, labels


def cmd_score(args: argparse.Namespace) -> None:
    settings = Settings(args)
    tracker = OutputTracker(settings.require("out"))
    if args.preds is not None:
        try:
            pred_lines = Path(args.preds).read_text(encoding="utf-8").splitlines()
            ref_lines = Path(args.refs).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise ConfigError(f"cannot read score inputs: {exc}") from exc
        ids = [str(i) for i in range(len(ref_lines))]
        predictions, references = pred_lines, ref_lines
        mode = "text"
    else:
        if args.logits is None or args.index is None or args.model is None:
            raise ConfigError("score needs --preds or all of --logits, --index, --model")
        model = load_model(args.model)
        index = load_logit_index(args.index)
        ids, references = _read_reference_file(args.refs)
        predictions = []
        decoded_rows = []
        with Path(args.logits).open("rb") as handle:
            for sample_id in ids:
                if sample_id not in index:
                    raise LogitFileError(f"no logit record for reference id {sample_id!r}")
                matrix = read_logit_entry(handle, index[sample_id])
                if matrix.shape[1] != model.vocab_size + 1:
                    raise LogitFileError(
                        f"logit record {sample_id!r} has {matrix.shape[1]} classes, "
                        f"expected {model.vocab_size + 1}"
                    )
                token_ids = greedy_decode(matrix)
                text = decode_tokens(model, token_ids)
                predictions.append(text)
                decoded_rows.append({"id": sample_id, "token_ids": token_ids, "text": text})
        if args.dump_decoded:
            with tracker.path("decoded.jsonl").open("w", encoding="utf-8") as out:
                for record in decoded_rows:
                    out.write(json.dumps(record, ensure_ascii=False) + "\n")
            tracker.record("decoded.jsonl")
        mode = "logits"
    report = evaluate(predictions, references, ids, per_sample=args.per_sample)
    tracker.write_text(
        "report.json", json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n"
    )
    if args.per_sample and report.per_sample is not None:
        _write_csv(
            tracker,
            "per_sample.csv",
            ("id", "char_edits", "ref_len"),
            [(row.id, row.char_edits, row.ref_len) for row in report.per_sample],
        )
    tracker.write_manifest(
        "score",
        {
            "mode": mode,
            "refs": args.refs,
            "preds": args.preds,
            "logits": args.logits,
            "index": args.index,
            "model": args.model,
            "per_sample": bool(args.per_sample),
        },
    )
    print(f"cer={report.cer:.4f} wer={report.wer:.4f} n={report.n_samples}")


def _format_float(value: float) -> str:
    return f"{value:.6f}"


def cmd_analyze(args: argparse.Namespace) -> None:
    settings = Settings(args)
    dataset = load_dataset(settings.require("dataset"))
    splits, k, seed = _resolve_folds(settings, dataset)
    selected = _selected_folds(settings, splits)
    kind = settings.get("tokenizer")
    if kind not in KINDS:
        raise ConfigError(f"unknown tokenizer kind {kind!r}, expected one of {KINDS}")
    sizes = settings.get("vocab_sizes")
    frame_subsample = settings.get("frame_subsample")
    want_figures = settings.get("figures")
    if want_figures:
        # pulls in matplotlib, which costs more than the rest of the CLI
        # start-up combined; every other subcommand stays free of it
        from .figures import (
            save_char_distribution_figure,
            save_feasibility_figure,
            save_token_usage_figure,
        )
    unigram_config = settings.unigram_config()
    tracker = OutputTracker(settings.require("out"))
    save_folds(splits, tracker.path("folds.json"), k=k, seed=seed)
    tracker.record("folds.json")

    divergences = []
    feasibility_rows = []
    for split in selected:
        train_labels = [s.label for s in dataset.subset(split.train_ids)]
        val_labels = [s.label for s in dataset.subset(split.val_ids)]
        train_dist = char_distribution(train_labels)
        val_dist = char_distribution(val_labels)
        for side, dist in (("train", train_dist), ("val", val_dist)):
            _write_csv(
                tracker,
                f"analysis/char_dist_f{split.fold_index}_{side}.csv",
                ("char", "count", "frequency"),
                [(ch, stat.count, _format_float(stat.frequency)) for ch, stat in dist.items()],
            )
        divergence = distribution_divergence(train_dist, val_dist)
        # Usage tables score validation labels; labels holding characters the
        # fold's tokenizers never saw cannot be encoded and are skipped, with
        # the counts recorded alongside the divergence summary.
        train_chars = set("".join(train_labels))
        encodable = [label for label in val_labels if set(label) <= train_chars]
        divergences.append(
            {
                "fold": split.fold_index,
                "missing_in_val": sorted(divergence.missing_in_val),
                "missing_in_train": sorted(divergence.missing_in_train),
                "total_variation": divergence.total_variation,
                "val_labels": len(val_labels),
                "val_labels_encodable": len(encodable),
            }
        )
        if want_figures:
            relative = f"analysis/figures/char_dist_f{split.fold_index}.png"
            save_char_distribution_figure(
                train_dist,
                val_dist,
                tracker.path(relative),
                f"character frequency, fold {split.fold_index}",
            )
            tracker.record(relative)

        fold_sizes = [len(train_chars)] if kind == "char" else sizes
        usage_tables = {}
        for size in fold_sizes:
            model = train(kind, train_labels, size, unigram_config)
            table = token_usage(model, encodable)
            usage_tables[size] = table
            _write_csv(
                tracker,
                f"analysis/token_usage_f{split.fold_index}_v{size}.csv",
                ("size", "percent"),
                [(bucket, _format_float(pct)) for bucket, pct in table.csv_rows()],
            )
            mean_chars = _mean_token_chars(model, train_labels)
            fraction = ctc_mod.feasibility_report(split, dataset, model, frame_subsample)
            feasibility_rows.append(
                (split.fold_index, size, mean_chars, fraction)
            )
        if want_figures:
            relative = f"analysis/figures/token_usage_f{split.fold_index}.png"
            save_token_usage_figure(
                usage_tables,
                tracker.path(relative),
                f"token length usage, fold {split.fold_index}",
            )
            tracker.record(relative)

    tracker.write_text(
        "analysis/divergence.json",
        json.dumps({"folds": divergences}, ensure_ascii=False, indent=2) + "\n",
    )
    _write_csv(
        tracker,
        "analysis/feasibility.csv",
        ("fold", "vocab_size", "mean_token_chars", "infeasible_fraction"),
        [
            (fold, size, _format_float(chars), _format_float(fraction))
            for fold, size, chars, fraction in feasibility_rows
        ],
    )
    _write_csv(
        tracker,
        "analysis/equivalent_epochs.csv",
        ("n_concat", "multiplier"),
        [(n, _format_float(float(n + 1))) for n in range(5)],
    )
    if want_figures and feasibility_rows:
        first_fold = feasibility_rows[0][0]
        rows = [
            (size, chars, fraction)
            for fold, size, chars, fraction in feasibility_rows
            if fold == first_fold
        ]
        save_feasibility_figure(
            rows,
            tracker.path("analysis/figures/feasibility.png"),
            f"alignment feasibility, fold {first_fold}",
        )
        tracker.record("analysis/figures/feasibility.png")
    tracker.write_manifest(
        "analyze",
        {
            "dataset": str(settings.get("dataset")),
            "protocol": settings.get("protocol"),
            "folds": k,
            "fold": settings.get("fold"),
            "seed": seed,
            "tokenizer": kind,
            "vocab_sizes": sizes,
            "frame_subsample": frame_subsample,
            "figures": bool(want_figures),
        },
    )
    print(f"analysis written to {tracker.root}")


def _mean_token_chars(model: TokenizerModel, labels: Sequence[str]) -> float:
    total_chars = 0
    total_tokens = 0
    for label in labels:
        ids = encode(model, label)
        total_chars += len(label)
        total_tokens += len(ids)
    return total_chars / total_tokens if total_tokens else 0.0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hwtok",
        description="Sub-word tokenization and augmentation pipeline for handwriting signals",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    def common(sub: argparse.ArgumentParser, *, out: bool = True) -> None:
        sub.add_argument("--config", help="JSON config file; flags override its values")
        if out:
            sub.add_argument("--out", help="output directory")

    split = commands.add_parser("split", help="write a deterministic k-fold assignment")
    common(split)
    split.add_argument("--dataset", help="dataset JSONL path")
    split.add_argument("--protocol", choices=("wd", "wi"))
    split.add_argument("--folds", type=int, help="number of folds")
    split.add_argument("--seed", type=int)
    split.set_defaults(handler=cmd_split)

    train_p = commands.add_parser("train-tokenizer", help="train tokenizer models")
    common(train_p)
    train_p.add_argument("--dataset")
    train_p.add_argument("--labels", help="plain text label file; one label per line")
    train_p.add_argument("--protocol", choices=("wd", "wi"))
    train_p.add_argument("--folds", type=int)
    train_p.add_argument("--fold", type=int, help="restrict to one fold")
    train_p.add_argument("--seed", type=int)
    train_p.add_argument("--tokenizer", choices=KINDS)
    train_p.add_argument(
        "--vocab-size", "--vocab-sizes", dest="vocab_sizes", type=_parse_sizes,
        help="vocabulary size, or a comma-separated sweep",
    )
    train_p.add_argument("--max-candidate-len", dest="max_candidate_len", type=int)
    train_p.add_argument("--min-count", dest="min_count", type=int)
    train_p.add_argument("--em-rounds", dest="em_rounds", type=int)
    train_p.add_argument("--prune-fraction", dest="prune_fraction", type=float)
    train_p.set_defaults(handler=cmd_train_tokenizer)

    encode_p = commands.add_parser("encode", help="encode label lines to token id lines")
    encode_p.add_argument("--model", required=True)
    encode_p.add_argument("--input", required=True)
    encode_p.add_argument("--output", required=True)
    encode_p.set_defaults(handler=cmd_encode)

    decode_p = commands.add_parser(
        "decode", help="decode token id lines, or greedy-decode a logit file"
    )
    decode_p.add_argument("--model")
    decode_p.add_argument("--input", help="token id lines (space separated)")
    decode_p.add_argument("--logits", help="binary logit file")
    decode_p.add_argument("--index", help="JSONL id-to-offset index for --logits")
    decode_p.add_argument("--output", required=True)
    decode_p.set_defaults(handler=cmd_decode)

    augment_p = commands.add_parser("augment", help="write one augmented epoch")
    common(augment_p)
    augment_p.add_argument("--dataset")
    augment_p.add_argument("--protocol", choices=("wd", "wi"))
    augment_p.add_argument("--folds", type=int)
    augment_p.add_argument("--fold", type=int)
    augment_p.add_argument("--seed", type=int)
    augment_p.add_argument("--concat", type=int, help="partners appended per sample")
    augment_p.add_argument("--separator")
    augment_p.add_argument("--epoch", type=int)
    augment_p.add_argument("--model", help="attach token ids from this tokenizer model")
    augment_p.set_defaults(handler=cmd_augment)

    score_p = commands.add_parser("score", help="score predictions against references")
    common(score_p)
    score_p.add_argument("--refs", required=True, help="JSONL with id and label, or text lines with --preds")
    score_p.add_argument("--preds", help="plain text predictions, line-aligned with --refs")
    score_p.add_argument("--logits", help="binary logit file")
    score_p.add_argument("--index", help="JSONL id-to-offset index")
    score_p.add_argument("--model", help="tokenizer model for decoding logits")
    score_p.add_argument("--per-sample", dest="per_sample", action="store_true")
    score_p.add_argument(
        "--dump-decoded", dest="dump_decoded", action="store_true",
        help="also write decoded.jsonl with per-sample decodings",
    )
    score_p.set_defaults(handler=cmd_score)

    analyze_p = commands.add_parser(
        "analyze", help="corpus analysis report: tables and figures"
    )
    common(analyze_p)
    analyze_p.add_argument("--dataset")
    analyze_p.add_argument("--protocol", choices=("wd", "wi"))
    analyze_p.add_argument("--folds", type=int)
    analyze_p.add_argument("--fold", type=int)
    analyze_p.add_argument("--seed", type=int)
    analyze_p.add_argument("--tokenizer", choices=KINDS)
    analyze_p.add_argument(
        "--vocab-size", "--vocab-sizes", dest="vocab_sizes", type=_parse_sizes,
        help="vocabulary size, or a comma-separated sweep",
    )
    analyze_p.add_argument("--frame-subsample", dest="frame_subsample", type=int)
    analyze_p.add_argument(
        "--figures", dest="figures", action=argparse.BooleanOptionalAction, default=None
    )
    analyze_p.add_argument("--max-candidate-len", dest="max_candidate_len", type=int)
    analyze_p.add_argument("--min-count", dest="min_count", type=int)
    analyze_p.add_argument("--em-rounds", dest="em_rounds", type=int)
    analyze_p.add_argument("--prune-fraction", dest="prune_fraction", type=float)
    analyze_p.set_defaults(handler=cmd_analyze)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "handler"):
        parser.print_help(file=sys.stderr)
        return 2
    try:
        args.handler(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
