"""Word-level reconciliation of per-encoder subword tokenizations.

Different encoders split the same word into different subword pieces. For
each word we record, per model, the contiguous piece range owning it, mark
the model whose split is shortest (first model wins ties), and pool each
model's piece vectors down to one vector per word under that model's own
tokenization.

Tokenization file: JSONL, one record per sentence per model:

    {"id": str, "model": str, "pieces": [str], "word_index": [int]}

word_index is parallel to pieces and maps each piece to its owning word;
it must be non-decreasing and cover every word index exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass
class Tokenization:
    """One model's subword split of one sentence."""

    model_id: str
    pieces: list[str]
    word_index: list[int]

    def __post_init__(self):
        if len(self.pieces) != len(self.word_index):
            raise DataError(
                f"model {self.model_id!r}: {len(self.pieces)} pieces vs "
                f"{len(self.word_index)} word indices"
            )
        if not self.pieces:
            raise DataError(f"model {self.model_id!r}: empty tokenization")
        # each step advances the word index by 0 or 1, starting at word 0:
        # non-decreasing, no gaps, every word covered
        prev = -1
        for k, w in enumerate(self.word_index):
            if w != prev and w != prev + 1:
                raise DataError(
                    f"model {self.model_id!r}: word_index jumps from {prev} to {w} "
                    f"at piece {k}"
                )
            prev = w

    @property
    def n_words(self) -> int:
        return self.word_index[-1] + 1

    def piece_ranges(self) -> list[tuple[int, int]]:
        """Per word, the [lo, hi) range of piece rows owning it."""
        ranges = []
        lo = 0
        for k in range(1, len(self.word_index) + 1):
            if k == len(self.word_index) or self.word_index[k] != self.word_index[lo]:
                ranges.append((lo, k))
                lo = k
        return ranges


@dataclass
class WordAlignment:
    """Per-word piece ranges for every model plus the minimum-length choice."""

    n_words: int
    model_ids: list[str]
    ranges: dict[str, list[tuple[int, int]]]  # model -> per-word (lo, hi)
    chosen_model: list[str]  # per word

    def chosen_range(self, word: int) -> tuple[int, int]:
        return self.ranges[self.chosen_model[word]][word]

    def piece_counts(self, word: int) -> dict[str, int]:
        return {m: hi - lo for m, (lo, hi) in
                ((m, self.ranges[m][word]) for m in self.model_ids)}


def select_min_tokenization(toks: list[Tokenization], n_words: int) -> WordAlignment:
    """Pick, per word, the model with the fewest pieces (earliest wins ties)."""
    if not toks:
        raise DataError("no tokenizations given")
    ranges: dict[str, list[tuple[int, int]]] = {}
    for tok in toks:
        if tok.n_words != n_words:
            raise DataError(
                f"model {tok.model_id!r} covers {tok.n_words} words, expected {n_words}"
            )
        if tok.model_id in ranges:
            raise DataError(f"duplicate tokenization for model {tok.model_id!r}")
        ranges[tok.model_id] = tok.piece_ranges()
    model_ids = [t.model_id for t in toks]
    chosen = []
    for w in range(n_words):
        best = min(model_ids, key=lambda m: ranges[m][w][1] - ranges[m][w][0])
        chosen.append(best)
    return WordAlignment(n_words, model_ids, ranges, chosen)


def pool_subwords(emb: np.ndarray, tok: Tokenization, mode: str = "mean") -> np.ndarray:
    """Collapse piece-level vectors to one float64 vector per word.

    mode="mean" averages the word's piece vectors, mode="first" takes the
    first piece's vector.
    """
    if mode not in ("first", "mean"):
        raise DataError(f"unknown pooling mode {mode!r}")
    emb = np.asarray(emb, dtype=np.float64)
    if emb.ndim != 2:
        raise DataError(f"embedding matrix must be 2-D, got shape {emb.shape}")
    if emb.shape[0] != len(tok.pieces):
        raise DataError(
            f"model {tok.model_id!r}: {emb.shape[0]} embedding rows vs "
            f"{len(tok.pieces)} pieces"
        )
    out = np.empty((tok.n_words, emb.shape[1]), dtype=np.float64)
    for w, (lo, hi) in enumerate(tok.piece_ranges()):
        if mode == "first":
            out[w] = emb[lo]
        else:
            out[w] = emb[lo:hi].mean(axis=0)
    return out


def read_tokenization_file(path) -> dict[str, Tokenization]:
    """Load one model's tokenization JSONL as a map sentence id -> Tokenization."""
    out: dict[str, Tokenization] = {}
    model = None
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as e:
                    raise DataError(f"{path}: line {lineno}: invalid JSON ({e.msg})")
                try:
                    tok = Tokenization(rec["model"], rec["pieces"], rec["word_index"])
                    sid = rec["id"]
                except KeyError as e:
                    raise DataError(f"{path}: line {lineno}: missing field {e}")
                if model is None:
                    model = tok.model_id
                elif tok.model_id != model:
                    raise DataError(
                        f"{path}: line {lineno}: mixed models {model!r} and "
                        f"{tok.model_id!r} in one file"
                    )
                if sid in out:
                    raise DataError(f"{path}: line {lineno}: duplicate sentence id {sid!r}")
                out[sid] = tok
    except OSError as e:
        raise DataError(f"cannot read tokenization file {path}: {e.strerror}") from None
    return out


def write_tokenization_file(toks: dict[str, Tokenization], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for sid, tok in toks.items():
            rec = {
                "id": sid,
                "model": tok.model_id,
                "pieces": tok.pieces,
                "word_index": tok.word_index,
            }
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
