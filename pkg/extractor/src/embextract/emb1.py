"""Writers for the two downstream file formats.

EMB1 is a little-endian binary container, one file per model per dataset:

    magic "EMB1" | u32 version=1 | u32 sentence count |
    per sentence: u16 id length | id bytes (UTF-8) | u32 rows | u32 dim |
                  rows*dim float32, row-major

Tokenizations travel as JSONL, one record per sentence:

    {"id": str, "model": str, "pieces": [str], "word_index": [int]}

Both formats are produced here independently; the consumer validates them
on read, which keeps the two sides honest about the byte layout.
"""

from __future__ import annotations

import json
import struct
from typing import Mapping, Sequence

import numpy as np

from .errors import ExtractError

MAGIC = b"EMB1"
VERSION = 1


def write_emb1(mats: Mapping[str, np.ndarray], path) -> None:
    """Write sentence-id -> float32 matrix pairs in mapping order."""
    chunks = [MAGIC, struct.pack("<II", VERSION, len(mats))]
    for sid, mat in mats.items():
        mat = np.ascontiguousarray(mat, dtype="<f4")
        if mat.ndim != 2 or mat.size == 0:
            raise ExtractError(f"sentence {sid!r}: matrix must be 2-D and nonempty")
        if not np.isfinite(mat).all():
            raise ExtractError(f"sentence {sid!r}: refusing to write non-finite values")
        sid_bytes = sid.encode("utf-8")
        if len(sid_bytes) > 0xFFFF:
            raise ExtractError(f"sentence id too long ({len(sid_bytes)} bytes)")
        chunks.append(struct.pack("<H", len(sid_bytes)))
        chunks.append(sid_bytes)
        chunks.append(struct.pack("<II", mat.shape[0], mat.shape[1]))
        chunks.append(mat.tobytes())
    try:
        with open(path, "wb") as f:
            f.write(b"".join(chunks))
    except OSError as e:
        raise ExtractError(f"cannot write {path}: {e.strerror}") from None


def write_tok_jsonl(records: Sequence[tuple[str, str, list[str], list[int]]], path) -> None:
    """Write (sentence id, model id, pieces, word_index) records as JSONL."""
    try:
        with open(path, "w", encoding="utf-8") as f:
            for sid, model, pieces, word_index in records:
                rec = {"id": sid, "model": model,
                       "pieces": pieces, "word_index": word_index}
                f.write(json.dumps(rec, ensure_ascii=False) + "\n")
    except OSError as e:
        raise ExtractError(f"cannot write {path}: {e.strerror}") from None
