"""Run every configured encoder over a dataset and dump portable files.

One EMB1 file plus one tokenization JSONL per model land in the output
directory, named ``<model>.<dataset-stem>.emb`` / ``....tok.jsonl`` so a
consumer can group splits by the leading model id. Sentences whose piece
count exceeds the length budget under any model are skipped everywhere,
keeping the per-model files aligned on the same sentence set.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .emb1 import write_emb1, write_tok_jsonl
from .encoders import DEFAULT_MODELS, TOY_DIM, make_encoder
from .errors import ExtractError, SkippedSentenceWarning


@dataclass
class ExtractorConfig:
    data_path: str
    out_dir: str
    models: tuple[str, ...] = DEFAULT_MODELS
    layer: "int | str" = "last"
    device: str = "cpu"
    max_seq_len: int = 512
    dim: int = TOY_DIM  # toy encoders only; real ones use their own width

    def __post_init__(self):
        self.models = tuple(self.models)
        if not self.models:
            raise ExtractError("need at least one model")
        if len(set(self.models)) != len(self.models):
            raise ExtractError("duplicate model identifiers")
        if self.max_seq_len < 1:
            raise ExtractError(f"max_seq_len must be >= 1, got {self.max_seq_len}")
        if self.dim < 1:
            raise ExtractError(f"dim must be >= 1, got {self.dim}")
        if self.layer != "last" and not isinstance(self.layer, int):
            raise ExtractError(f"layer must be 'last' or an integer, got {self.layer!r}")


@dataclass
class ExtractReport:
    """What was written where, and what was dropped."""

    n_sentences: int
    skipped: list = field(default_factory=list)
    files: dict = field(default_factory=dict)  # model id -> (emb path, tok path)


def read_sentences(path) -> list[tuple[str, list[str]]]:
    """Load (id, words) pairs from dataset JSONL; labels are ignored."""
    out = []
    seen = set()
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as e:
        raise ExtractError(f"cannot read dataset {path}: {e.strerror}") from None
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise ExtractError(f"{path}: line {lineno}: invalid JSON ({e.msg})")
        for key in ("id", "words"):
            if key not in rec:
                raise ExtractError(f"{path}: line {lineno}: missing field {key!r}")
        sid = str(rec["id"])
        words = rec["words"]
        if (not isinstance(words, list) or not words
                or any(not isinstance(w, str) or not w for w in words)):
            raise ExtractError(
                f"{path}: line {lineno}: words must be a nonempty list of nonempty strings"
            )
        if sid in seen:
            raise ExtractError(f"{path}: line {lineno}: duplicate sentence id {sid!r}")
        seen.add(sid)
        out.append((sid, list(words)))
    if not out:
        raise ExtractError(f"{path}: no sentences")
    return out


def _check_output(sid, model_id, n_words, pieces, word_index, mat):
    if not pieces:
        raise ExtractError(f"sentence {sid!r}: model {model_id!r} produced no pieces")
    if len(pieces) != len(word_index):
        raise ExtractError(
            f"sentence {sid!r}: model {model_id!r}: {len(pieces)} pieces vs "
            f"{len(word_index)} word indices"
        )
    prev = -1
    for w in word_index:
        if w != prev and w != prev + 1:
            raise ExtractError(
                f"sentence {sid!r}: model {model_id!r}: word_index jumps "
                f"from {prev} to {w}"
            )
        prev = w
    if prev != n_words - 1:
        raise ExtractError(
            f"sentence {sid!r}: model {model_id!r} covers {prev + 1} of "
            f"{n_words} words"
        )
    if mat.shape[0] != len(pieces):
        raise ExtractError(
            f"sentence {sid!r}: model {model_id!r}: {mat.shape[0]} rows vs "
            f"{len(pieces)} pieces"
        )
    if not np.isfinite(mat).all():
        raise ExtractError(f"sentence {sid!r}: model {model_id!r}: non-finite values")


def extract(cfg: ExtractorConfig) -> ExtractReport:
    """Encode the dataset with every model and write its files."""
    sentences = read_sentences(cfg.data_path)
    encoders = [make_encoder(m, dim=cfg.dim, layer=cfg.layer, device=cfg.device)
                for m in cfg.models]
    ids = [enc.model_id for enc in encoders]
    if len(set(ids)) != len(ids):
        raise ExtractError(f"model identifiers collide after sanitizing: {ids}")

    per_model = {m: {} for m in ids}
    skipped = []
    for sid, words in sentences:
        results = {}
        over = None
        for enc in encoders:
            pieces, word_index, mat = enc.run(words)
            _check_output(sid, enc.model_id, len(words), pieces, word_index, mat)
            if over is None and len(pieces) > cfg.max_seq_len:
                over = (enc.model_id, len(pieces))
            results[enc.model_id] = (pieces, word_index, mat)
        if over is not None:
            warnings.warn(
                f"sentence {sid!r}: {over[1]} pieces under model {over[0]!r} "
                f"exceeds max length {cfg.max_seq_len}; sentence skipped",
                SkippedSentenceWarning,
                stacklevel=2,
            )
            skipped.append(sid)
            continue
        for m in ids:
            per_model[m][sid] = results[m]

    kept = len(sentences) - len(skipped)
    if kept == 0:
        raise ExtractError("every sentence exceeded the length limit; nothing to write")

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(cfg.data_path).stem
    report = ExtractReport(n_sentences=kept, skipped=skipped)
    for m in ids:
        emb_path = out_dir / f"{m}.{stem}.emb"
        tok_path = out_dir / f"{m}.{stem}.tok.jsonl"
        write_emb1({sid: mat for sid, (_, _, mat) in per_model[m].items()}, emb_path)
        write_tok_jsonl(
            [(sid, m, pieces, word_index)
             for sid, (pieces, word_index, _) in per_model[m].items()],
            tok_path,
        )
        report.files[m] = (emb_path, tok_path)
    return report
