"""Checkpoint files: training state serialized for rotation, resume, predict.

Layout, little-endian:

    magic "CKPT" | u32 version=1 | u32 header length | header JSON (UTF-8) |
    float64 blocks, back to back, in the order declared by header["blocks"]

The header carries epoch, dev F1, the training config and its hash, the
label set, dims, the model-id order, the optimizer step and RNG state.
Full checkpoints also store optimizer moments and the best-on-dev
parameters seen so far, so resuming reproduces a straight run exactly.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .corpus import LabelSet
from .crf import CrfParams
from .errors import DataError
from .model import ModelParams

MAGIC = b"CKPT"
VERSION = 1


def config_hash(config: Mapping) -> str:
    blob = json.dumps(config, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class Checkpoint:
    """One decoded checkpoint file."""

    epoch: int
    dev_f1: float
    params: ModelParams
    labels: tuple[str, ...]
    model_ids: tuple[str, ...]
    config: dict
    best_epoch: int
    best_dev_f1: float
    best_params: ModelParams | None  # None in slim (best-only) checkpoints
    opt_state: dict[str, np.ndarray] | None
    opt_step: int
    rng_state: dict | None

    @property
    def label_set(self) -> LabelSet:
        return LabelSet(self.labels)


def _split_params(blocks: dict[str, np.ndarray], prefix: str = "") -> ModelParams:
    def take(name):
        try:
            return blocks[prefix + name]
        except KeyError:
            raise DataError(f"checkpoint missing block {prefix + name!r}") from None

    head = CrfParams(take("emit_w"), take("emit_b"), take("trans"),
                     take("start"), take("end"))
    proj = {
        name[len(prefix) + 5:]: arr
        for name, arr in blocks.items()
        if name.startswith(prefix + "proj.")
    }
    return ModelParams(head, proj)


def save_checkpoint(
    path,
    epoch: int,
    dev_f1: float,
    params: ModelParams,
    labels: tuple[str, ...],
    model_ids: tuple[str, ...],
    config: Mapping,
    best_epoch: int,
    best_dev_f1: float,
    best_params: ModelParams | None = None,
    opt_state: Mapping[str, np.ndarray] | None = None,
    opt_step: int = 0,
    rng_state: dict | None = None,
) -> None:
    blocks: dict[str, np.ndarray] = dict(params.arrays())
    if opt_state is not None:
        for name in sorted(opt_state):
            blocks[f"opt.{name}"] = opt_state[name]
    if best_params is not None:
        for name, arr in best_params.arrays().items():
            blocks[f"best.{name}"] = arr

    header = {
        "epoch": epoch,
        "dev_f1": dev_f1,
        "config": dict(config),
        "config_hash": config_hash(config),
        "labels": list(labels),
        "model_ids": list(model_ids),
        "n_tags": params.head.n_tags,
        "dim": params.head.dim,
        "blocks": [{"name": n, "shape": list(b.shape)} for n, b in blocks.items()],
        "best_epoch": best_epoch,
        "best_dev_f1": best_dev_f1,
        "opt_step": opt_step,
        "rng_state": rng_state,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(header_bytes)))
        f.write(header_bytes)
        for block in blocks.values():
            f.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise DataError(f"cannot read checkpoint {path}: {e.strerror}") from None
    if data[:4] != MAGIC:
        raise DataError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 12:
        raise DataError(f"{path}: truncated header")
    version, header_len = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    pos = 12
    if pos + header_len > len(data):
        raise DataError(f"{path}: truncated header")
    try:
        header = json.loads(data[pos:pos + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise DataError(f"{path}: corrupt header") from None
    pos += header_len

    blocks: dict[str, np.ndarray] = {}
    for spec in header["blocks"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if pos + nbytes > len(data):
            raise DataError(f"{path}: truncated block {spec['name']!r}")
        arr = np.frombuffer(data[pos:pos + nbytes], dtype="<f8").reshape(shape)
        blocks[spec["name"]] = arr.copy()
        pos += nbytes
    if pos != len(data):
        raise DataError(f"{path}: {len(data) - pos} trailing bytes")

    params = _split_params(blocks)
    has_best = any(n.startswith("best.") for n in blocks)
    best_params = _split_params(blocks, "best.") if has_best else None
    opt_state = {
        name[4:]: arr for name, arr in blocks.items() if name.startswith("opt.")
    }
    return Checkpoint(
        epoch=int(header["epoch"]),
        dev_f1=float(header["dev_f1"]),
        params=params,
        labels=tuple(header["labels"]),
        model_ids=tuple(header["model_ids"]),
        config=header["config"],
        best_epoch=int(header["best_epoch"]),
        best_dev_f1=float(header["best_dev_f1"]),
        best_params=best_params,
        opt_state=opt_state or None,
        opt_step=int(header.get("opt_step", 0)),
        rng_state=header.get("rng_state"),
    )


def checkpoint_path(ckpt_dir: Path, epoch: int) -> Path:
    return Path(ckpt_dir) / f"epoch_{epoch:04d}.ckpt"


def list_checkpoints(ckpt_dir) -> list[Path]:
    """Rotation-managed epoch checkpoints, oldest first."""
    return sorted(Path(ckpt_dir).glob("epoch_*.ckpt"))


def rotate_checkpoints(ckpt_dir, keep: int) -> None:
    """Delete oldest epoch checkpoints until at most keep-1 remain, making
    room for the next write without ever exceeding keep on disk."""
    existing = list_checkpoints(ckpt_dir)
    while len(existing) >= keep:
        existing.pop(0).unlink()
