"""EMB1 embedding files, the ensemble average, and the in-memory store.

EMB1 is a little-endian binary format, one file per model per dataset
split:

    magic "EMB1" | u32 version=1 | u32 sentence count |
    per sentence: u16 id length | id bytes (UTF-8) | u32 rows | u32 dim |
                  rows*dim float32, row-major

Rows are vectors for one sentence: subword pieces when written by an
extractor, words when written by the synthetic generator. Non-finite
values are rejected on read.
"""

from __future__ import annotations

import struct
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

MAGIC = b"EMB1"
VERSION = 1


def read_embedding_file(path) -> dict[str, np.ndarray]:
    """Read an EMB1 file into an ordered map sentence id -> float32 matrix."""
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise DataError(f"cannot read embedding file {path}: {e.strerror}") from None

    def need(n: int, what: str) -> int:
        if pos + n > len(data):
            raise DataError(f"{path}: truncated {what} at byte {pos}")
        return pos + n

    pos = 0
    end = need(4, "magic")
    if data[pos:end] != MAGIC:
        raise DataError(f"{path}: bad magic {data[pos:end]!r}")
    pos = end
    end = need(8, "header")
    version, count = struct.unpack_from("<II", data, pos)
    pos = end
    if version != VERSION:
        raise DataError(f"{path}: unsupported version {version}")

    out: dict[str, np.ndarray] = {}
    for k in range(count):
        end = need(2, "id length")
        (id_len,) = struct.unpack_from("<H", data, pos)
        pos = end
        end = need(id_len, "sentence id")
        try:
            sid = data[pos:end].decode("utf-8")
        except UnicodeDecodeError:
            raise DataError(f"{path}: sentence {k}: id is not valid UTF-8") from None
        pos = end
        end = need(8, "matrix header")
        rows, dim = struct.unpack_from("<II", data, pos)
        pos = end
        if rows == 0 or dim == 0:
            raise DataError(f"{path}: sentence {sid!r}: empty matrix ({rows}x{dim})")
        end = need(rows * dim * 4, "matrix payload")
        mat = np.frombuffer(data[pos:end], dtype="<f4").reshape(rows, dim)
        pos = end
        if not np.isfinite(mat).all():
            raise DataError(f"{path}: sentence {sid!r}: non-finite values")
        if sid in out:
            raise DataError(f"{path}: duplicate sentence id {sid!r}")
        out[sid] = mat.copy()
    if pos != len(data):
        raise DataError(f"{path}: {len(data) - pos} trailing bytes after {count} sentences")
    return out


def write_embedding_file(mats: Mapping[str, np.ndarray], path) -> None:
    """Write matrices as EMB1, in the mapping's iteration order."""
    chunks = [MAGIC, struct.pack("<II", VERSION, len(mats))]
    for sid, mat in mats.items():
        mat = np.ascontiguousarray(mat, dtype="<f4")
        if mat.ndim != 2 or mat.size == 0:
            raise DataError(f"sentence {sid!r}: matrix must be 2-D and nonempty")
        if not np.isfinite(mat).all():
            raise DataError(f"sentence {sid!r}: refusing to write non-finite values")
        sid_bytes = sid.encode("utf-8")
        if len(sid_bytes) > 0xFFFF:
            raise DataError(f"sentence id too long ({len(sid_bytes)} bytes)")
        chunks.append(struct.pack("<H", len(sid_bytes)))
        chunks.append(sid_bytes)
        chunks.append(struct.pack("<II", mat.shape[0], mat.shape[1]))
        chunks.append(mat.tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


def ensemble_average(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Elementwise mean of equally-shaped matrices, in float64.

    Summation is sequential in the given order; the store always passes
    matrices in model-configuration order so results are reproducible.
    """
    if not mats:
        raise DataError("ensemble of zero matrices")
    first = np.asarray(mats[0])
    if first.ndim != 2:
        raise DataError(f"expected 2-D matrices, got shape {first.shape}")
    acc = first.astype(np.float64, copy=True)
    for m in mats[1:]:
        m = np.asarray(m)
        if m.shape != first.shape:
            raise DataError(f"shape mismatch in ensemble: {m.shape} vs {first.shape}")
        acc += m.astype(np.float64)
    return acc / len(mats)


class EmbeddingStore:
    """Word-level embedding matrices per sentence, one per model.

    Immutable after construction; matrices for one sentence all share the
    same row count (the word count). Dims must match across models unless
    allow_mixed_dim is set (the per-model projection path).
    """

    def __init__(
        self,
        per_model: Mapping[str, Mapping[str, np.ndarray]],
        model_order: Sequence[str] | None = None,
        allow_mixed_dim: bool = False,
    ):
        if not per_model:
            raise DataError("embedding store needs at least one model")
        if model_order is None:
            model_order = sorted(per_model)
        else:
            model_order = list(model_order)
            missing = [m for m in model_order if m not in per_model]
            if missing:
                raise DataError(f"no embeddings for model(s) {missing}")
        self.model_ids: tuple[str, ...] = tuple(model_order)
        ids = set(per_model[self.model_ids[0]])
        for m in self.model_ids[1:]:
            if set(per_model[m]) != ids:
                raise DataError(
                    f"model {m!r} covers a different sentence set than "
                    f"{self.model_ids[0]!r}"
                )
        self.dims = {m: None for m in self.model_ids}
        self._data: dict[str, list[np.ndarray]] = {}
        for sid in ids:
            row_counts = set()
            mats = []
            for m in self.model_ids:
                mat = np.asarray(per_model[m][sid], dtype=np.float64)
                if mat.ndim != 2:
                    raise DataError(f"sentence {sid!r}, model {m!r}: matrix not 2-D")
                row_counts.add(mat.shape[0])
                if self.dims[m] is None:
                    self.dims[m] = mat.shape[1]
                elif self.dims[m] != mat.shape[1]:
                    raise DataError(
                        f"model {m!r}: inconsistent dims {self.dims[m]} vs {mat.shape[1]}"
                    )
                mats.append(mat)
            if len(row_counts) != 1:
                raise DataError(
                    f"sentence {sid!r}: word counts differ across models: "
                    f"{sorted(row_counts)}"
                )
            self._data[sid] = mats
        if not allow_mixed_dim and len(set(self.dims.values())) != 1:
            raise DataError(
                f"embedding dims differ across models ({self.dims}); "
                "enable a projection dim to combine them"
            )

    def __contains__(self, sid: str) -> bool:
        return sid in self._data

    def __len__(self) -> int:
        return len(self._data)

    @property
    def sentence_ids(self) -> list[str]:
        return sorted(self._data)

    def matrices(self, sid: str) -> list[np.ndarray]:
        """Per-model word matrices in model order."""
        try:
            return self._data[sid]
        except KeyError:
            raise DataError(f"no embeddings for sentence {sid!r}") from None

    def n_words(self, sid: str) -> int:
        return self.matrices(sid)[0].shape[0]

    def ensemble(self, sid: str) -> np.ndarray:
        return ensemble_average(self.matrices(sid))

    def restrict(self, model_ids: Sequence[str]) -> "EmbeddingStore":
        """Sub-store over the given models, in the given order."""
        per_model = {}
        for m in model_ids:
            if m not in self.model_ids:
                raise DataError(f"model {m!r} not in store (has {list(self.model_ids)})")
            idx = self.model_ids.index(m)
            per_model[m] = {sid: mats[idx] for sid, mats in self._data.items()}
        return EmbeddingStore(per_model, model_order=list(model_ids),
                              allow_mixed_dim=True)


def subset(mats: Mapping[str, np.ndarray], ids: Iterable[str], where: str = "") -> dict:
    out = {}
    for sid in ids:
        if sid not in mats:
            raise DataError(f"{where}missing embeddings for sentence {sid!r}")
        out[sid] = mats[sid]
    return out
