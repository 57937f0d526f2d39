"""Assemble a word-level EmbeddingStore from a directory of embedding files.

Directory convention: one EMB1 file per model per split, named
`<model>.<anything>.emb` (model id = stem before the first dot; splits of
one model are merged). If a sibling `<same name>.tok.jsonl` tokenization
file exists, the EMB1 rows are subword pieces and get pooled to word
level under that model's own tokenization; otherwise rows are taken as
word-level already.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .align import pool_subwords, read_tokenization_file
from .embfile import EmbeddingStore, read_embedding_file
from .errors import DataError


def tokenization_path_for(emb_path: Path) -> Path:
    return emb_path.with_name(emb_path.name[: -len(".emb")] + ".tok.jsonl")


def discover_models(emb_dir) -> dict[str, list[Path]]:
    emb_dir = Path(emb_dir)
    if not emb_dir.is_dir():
        raise DataError(f"embedding directory {emb_dir} does not exist")
    files = sorted(emb_dir.glob("*.emb"))
    if not files:
        raise DataError(f"no .emb files in {emb_dir}")
    by_model: dict[str, list[Path]] = {}
    for path in files:
        model = path.name.split(".")[0]
        if not model:
            raise DataError(f"cannot derive a model id from file name {path.name!r}")
        by_model.setdefault(model, []).append(path)
    return by_model


def build_store(
    emb_dir,
    pooling: str = "mean",
    models: Sequence[str] | None = None,
    allow_mixed_dim: bool = False,
) -> EmbeddingStore:
    by_model = discover_models(emb_dir)
    if models is not None:
        missing = [m for m in models if m not in by_model]
        if missing:
            raise DataError(
                f"no embedding files for model(s) {missing} in {emb_dir} "
                f"(found {sorted(by_model)})"
            )
        order = list(models)
    else:
        order = sorted(by_model)

    per_model: dict[str, dict[str, np.ndarray]] = {}
    for model in order:
        merged: dict[str, np.ndarray] = {}
        for path in by_model[model]:
            mats = read_embedding_file(path)
            tok_path = tokenization_path_for(path)
            if tok_path.exists():
                toks = read_tokenization_file(tok_path)
                for sid, mat in mats.items():
                    if sid not in toks:
                        raise DataError(
                            f"{tok_path}: no tokenization for sentence {sid!r}"
                        )
                    mats[sid] = pool_subwords(mat, toks[sid], pooling)
            for sid, mat in mats.items():
                if sid in merged:
                    raise DataError(
                        f"sentence {sid!r} appears in two files for model {model!r}"
                    )
                merged[sid] = mat
        per_model[model] = merged
    return EmbeddingStore(per_model, model_order=order, allow_mixed_dim=allow_mixed_dim)
