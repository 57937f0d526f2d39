"""Encoder backends: hash-seeded offline stand-ins and real transformers.

The toy family tokenizes deterministically and derives piece vectors from
a SHAKE-256 digest of (model id, neighbor piece, piece), so runs are
byte-reproducible on any machine with no downloads. The three variants
split words differently on purpose, so the per-word piece counts disagree
downstream exactly the way heterogeneous real tokenizers do.

Identifiers of the form ``hf:<name>`` load a Hugging Face encoder instead
and export its hidden states with the tokenizer's own word mapping; this
path needs torch + transformers and network or a local cache.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import ExtractError, ModelLoadError

TOY_DIM = 32


def _hash_vector(model_id: str, context: str, piece: str, dim: int) -> np.ndarray:
    raw = hashlib.shake_256(
        f"{model_id}\x1f{context}\x1f{piece}".encode("utf-8")
    ).digest(4 * dim)
    u = np.frombuffer(raw, dtype="<u4").astype(np.float64)
    return u / 2.0**31 - 1.0  # uniform-ish in [-1, 1)


class ToyEncoder:
    """Deterministic offline encoder with a pluggable word splitter.

    Vectors mix a piece-identity term with a small left-neighbor term so
    repeated pieces are not exact duplicates.
    """

    def __init__(self, model_id: str, split_word, dim: int = TOY_DIM):
        if dim < 1:
            raise ExtractError(f"dim must be >= 1, got {dim}")
        self.model_id = model_id
        self.dim = dim
        self._split = split_word

    def run(self, words: list[str]) -> tuple[list[str], list[int], np.ndarray]:
        pieces: list[str] = []
        word_index: list[int] = []
        for w, word in enumerate(words):
            parts = self._split(word)
            pieces.extend(parts)
            word_index.extend([w] * len(parts))
        mat = np.empty((len(pieces), self.dim))
        for k, piece in enumerate(pieces):
            prev = pieces[k - 1] if k else ""
            mat[k] = (0.9 * _hash_vector(self.model_id, "", piece, self.dim)
                      + 0.1 * _hash_vector(self.model_id, prev, piece, self.dim))
        return pieces, word_index, mat.astype(np.float32)


def _split_whole(word: str) -> list[str]:
    return [word]


def _split_halves(word: str) -> list[str]:
    if len(word) < 4:
        return [word]
    mid = (len(word) + 1) // 2
    return [word[:mid], word[mid:]]


def _split_pairs(word: str) -> list[str]:
    return [word[i:i + 2] for i in range(0, len(word), 2)] or [word]


_TOY_SPLITTERS = {
    "toy-word": _split_whole,
    "toy-half": _split_halves,
    "toy-char": _split_pairs,
}

DEFAULT_MODELS = ("toy-word", "toy-half", "toy-char")


class HfEncoder:
    """Frozen pretrained encoder exporting one chosen hidden layer.

    For encoder-decoder checkpoints only the encoder stack is run. Special
    tokens are dropped so rows line up with the exported piece list.
    """

    def __init__(self, model_id: str, name: str, layer="last", device: str = "cpu"):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as e:
            raise ModelLoadError(
                f"model {name!r} needs torch and transformers ({e})"
            ) from None
        self.model_id = model_id
        self.layer = layer
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(name)
            model = AutoModel.from_pretrained(name, output_hidden_states=True)
        except Exception as e:
            raise ModelLoadError(f"cannot load model {name!r}: {e}") from None
        if hasattr(model, "get_encoder"):
            model = model.get_encoder()
        self._torch = torch
        self.model = model.to(device).eval()
        self.device = device

    def run(self, words: list[str]) -> tuple[list[str], list[int], np.ndarray]:
        enc = self.tokenizer(words, is_split_into_words=True, return_tensors="pt")
        word_ids = enc.word_ids(0)
        with self._torch.no_grad():
            out = self.model(**{k: v.to(self.device) for k, v in enc.items()})
        states = (out.last_hidden_state if self.layer == "last"
                  else out.hidden_states[self.layer])
        hidden = states[0].cpu().numpy()
        keep = [k for k, w in enumerate(word_ids) if w is not None]
        pieces = [self.tokenizer.convert_ids_to_tokens(int(enc["input_ids"][0][k]))
                  for k in keep]
        word_index = [word_ids[k] for k in keep]
        return pieces, word_index, hidden[keep].astype(np.float32)


def make_encoder(name: str, dim: int = TOY_DIM, layer="last", device: str = "cpu"):
    """Resolve a model identifier to a ready encoder instance."""
    if name in _TOY_SPLITTERS:
        return ToyEncoder(name, _TOY_SPLITTERS[name], dim=dim)
    if name.startswith("hf:"):
        file_id = sanitize_model_id(name)
        return HfEncoder(file_id, name[3:], layer=layer, device=device)
    raise ModelLoadError(
        f"unknown model {name!r}; use one of {sorted(_TOY_SPLITTERS)} or 'hf:<name>'"
    )


def sanitize_model_id(name: str) -> str:
    """File-name-safe model id; the consumer parses it back from the name."""
    out = []
    for ch in name:
        out.append(ch if ch.isalnum() or ch in "_-" else "_")
    return "".join(out)
