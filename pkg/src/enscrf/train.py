"""Mini-batch CRF training: gradient accumulation, checkpoint rotation,
best-on-dev selection.

One optimizer step consumes batch_size * accumulation_steps sentences and
applies the mean of their gradients, so accumulation over k sentences is
exactly one step on their mean gradient. Sentences are shuffled every
epoch with the run's seeded RNG; everything downstream of the seed is
deterministic, and a checkpoint restores parameters, optimizer moments,
RNG state and best-so-far tracking so a resumed run is bit-identical to
an uninterrupted one.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import checkpoint as ckpt_io
from . import crf
from .corpus import LabelSet, Sentence, spans_to_bio
from .embfile import EmbeddingStore
from .errors import DataError, TrainingError
from .evaluate import entity_f1
from .model import ModelParams, combine_inputs, decode_store, init_model_params, masks_for

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

OPTIMIZERS = ("adam", "sgd")
POOLING_MODES = ("mean", "first")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    accumulation_steps: int = 4
    epochs: int = 50
    checkpoint_keep: int = 10
    optimizer: str = "adam"
    seed: int = 0
    batch_size: int = 1
    pooling: str = "mean"
    constrained: bool = False
    proj_dim: int | None = None

    def __post_init__(self):
        if self.learning_rate < 0:
            raise DataError(f"learning_rate must be >= 0, got {self.learning_rate}")
        for name in ("accumulation_steps", "epochs", "checkpoint_keep", "batch_size"):
            if getattr(self, name) < 1:
                raise DataError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.optimizer not in OPTIMIZERS:
            raise DataError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.pooling not in POOLING_MODES:
            raise DataError(f"pooling must be one of {POOLING_MODES}, got {self.pooling!r}")
        if self.proj_dim is not None and self.proj_dim < 1:
            raise DataError(f"proj_dim must be >= 1, got {self.proj_dim}")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    dev_precision: float
    dev_recall: float
    dev_f1: float


@dataclass
class TrainReport:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    best_dev_f1: float = 0.0
    wall_time_s: float = 0.0

    def as_dict(self) -> dict:
        return {
            "epochs": [asdict(e) for e in self.epochs],
            "best_epoch": self.best_epoch,
            "best_dev_f1": self.best_dev_f1,
            "wall_time_s": self.wall_time_s,
        }


def _init_opt_state(cfg: TrainConfig, params: ModelParams) -> dict[str, np.ndarray]:
    if cfg.optimizer == "sgd":
        return {}
    state = {}
    for name, arr in params.arrays().items():
        state[f"m.{name}"] = np.zeros_like(arr)
        state[f"v.{name}"] = np.zeros_like(arr)
    return state


def _apply_update(
    cfg: TrainConfig,
    params: ModelParams,
    grads: dict[str, np.ndarray],
    opt_state: dict[str, np.ndarray],
    step: int,
) -> int:
    """One optimizer step in place; returns the new step count."""
    arrays = params.arrays()
    if cfg.optimizer == "sgd":
        for name, g in grads.items():
            arrays[name] -= cfg.learning_rate * g
        return step + 1
    step += 1
    bias1 = 1.0 - ADAM_BETA1 ** step
    bias2 = 1.0 - ADAM_BETA2 ** step
    for name, g in grads.items():
        m = opt_state[f"m.{name}"]
        v = opt_state[f"v.{name}"]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * np.square(g)
        arrays[name] -= cfg.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + ADAM_EPS)
    return step


def sentence_gradients(
    params: ModelParams,
    mats: Sequence[np.ndarray],
    model_ids: Sequence[str],
    gold_tags: Sequence[int],
    trans_mask: np.ndarray | None = None,
    start_mask: np.ndarray | None = None,
) -> tuple[dict[str, np.ndarray], float]:
    """NLL loss and gradients for every trainable block, one sentence."""
    vecs = combine_inputs(mats, model_ids, params)
    lat = crf.emission_scores(vecs, params.head, trans_mask, start_mask)
    lg = crf.loss_gradients(lat, gold_tags)
    d_w, d_b = crf.emission_param_gradients(vecs, lg.emissions)
    grads = {
        "emit_w": d_w,
        "emit_b": d_b,
        "trans": lg.trans,
        "start": lg.start,
        "end": lg.end,
    }
    if params.proj:
        d_vecs = lg.emissions @ params.head.emit_w  # (N, d)
        k = len(mats)
        for i, m in enumerate(model_ids):
            grads[f"proj.{m}"] = np.asarray(mats[i]).T @ d_vecs / k
    return grads, lg.loss


def _check_coverage(
    sentences: Sequence[Sentence], store: EmbeddingStore, split: str
) -> None:
    for s in sentences:
        if s.id not in store:
            raise DataError(f"{split} sentence {s.id!r} has no embeddings")
        if store.n_words(s.id) != len(s):
            raise DataError(
                f"{split} sentence {s.id!r}: {len(s)} words but embeddings have "
                f"{store.n_words(s.id)} rows"
            )


def fit(
    train: Sequence[Sentence],
    dev: Sequence[Sentence],
    store: EmbeddingStore,
    label_set: LabelSet,
    cfg: TrainConfig,
    out_dir,
    resume_from=None,
    log=None,
) -> tuple[ModelParams, TrainReport]:
    """Train for cfg.epochs epochs, checkpointing each one.

    Keeps at most cfg.checkpoint_keep epoch checkpoints on disk, maintains
    out_dir/best.ckpt, and returns the parameters of the epoch with the
    highest dev entity F1 (earliest epoch on ties).
    """
    t0 = time.perf_counter()
    if not train:
        raise DataError("empty training set")
    if not dev:
        raise DataError("empty dev set")
    _check_coverage(train, store, "train")
    _check_coverage(dev, store, "dev")

    out_dir = Path(out_dir)
    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)

    gold = {s.id: spans_to_bio(s.spans, len(s), label_set) for s in train}
    trans_mask, start_mask = masks_for(label_set, cfg.constrained)
    dev_gold = [s.spans for s in dev]

    # Without projections the CRF input never changes: ensemble once.
    inputs: dict[str, list[np.ndarray]] = {}
    for s in train:
        if cfg.proj_dim is None:
            inputs[s.id] = [store.ensemble(s.id)]
        else:
            inputs[s.id] = store.matrices(s.id)
    single = ("_combined",) if cfg.proj_dim is None else store.model_ids

    rng = np.random.default_rng(cfg.seed)
    if resume_from is None:
        params = init_model_params(
            label_set.n_tags, dict(store.dims), cfg.proj_dim, rng
        )
        opt_state = _init_opt_state(cfg, params)
        opt_step = 0
        start_epoch = 0
        best_params = params.copy()
        best_epoch = 0
        best_f1 = -1.0
    else:
        ck = ckpt_io.load_checkpoint(resume_from)
        if ck.labels != label_set.labels:
            raise DataError(
                f"checkpoint labels {ck.labels} != requested labels {label_set.labels}"
            )
        if ck.model_ids != store.model_ids:
            raise DataError(
                f"checkpoint model order {ck.model_ids} != store order {store.model_ids}"
            )
        if ck.config.get("optimizer") != cfg.optimizer:
            raise DataError(
                f"cannot resume {ck.config.get('optimizer')!r} checkpoint with "
                f"optimizer {cfg.optimizer!r}"
            )
        if ck.opt_state is None and cfg.optimizer == "adam":
            raise DataError(f"{resume_from} has no optimizer state; not resumable")
        if ck.epoch >= cfg.epochs:
            raise DataError(
                f"checkpoint is at epoch {ck.epoch}, nothing to do for epochs={cfg.epochs}"
            )
        params = ck.params
        opt_state = ck.opt_state or {}
        opt_step = ck.opt_step
        start_epoch = ck.epoch
        best_params = ck.best_params if ck.best_params is not None else ck.params.copy()
        best_epoch = ck.best_epoch
        best_f1 = ck.best_dev_f1
        if ck.rng_state is not None:
            rng.bit_generator.state = ck.rng_state

    report = TrainReport()
    window = cfg.batch_size * cfg.accumulation_steps
    n = len(train)

    for epoch in range(start_epoch + 1, cfg.epochs + 1):
        order = rng.permutation(n)
        losses = np.empty(n)
        pos = 0
        while pos < n:
            idx = order[pos:pos + window]
            acc: dict[str, np.ndarray] = {}
            for j, i in enumerate(idx):
                sent = train[int(i)]
                grads, loss = sentence_gradients(
                    params, inputs[sent.id], single, gold[sent.id],
                    trans_mask, start_mask,
                )
                if not np.isfinite(loss):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch}, sentence {sent.id!r}"
                    )
                losses[pos + j] = loss
                for name, g in grads.items():
                    if name in acc:
                        acc[name] += g
                    else:
                        acc[name] = g.copy()
            for name in acc:
                acc[name] /= len(idx)
            opt_step = _apply_update(cfg, params, acc, opt_state, opt_step)
            pos += len(idx)

        dev_pred = decode_store(params, dev, store, label_set, cfg.constrained)
        metrics = entity_f1(dev_gold, dev_pred)
        dev_f1 = metrics.f1
        if dev_f1 > best_f1:
            best_f1 = dev_f1
            best_epoch = epoch
            best_params = params.copy()
            ckpt_io.save_checkpoint(
                out_dir / "best.ckpt",
                epoch=epoch, dev_f1=dev_f1, params=best_params,
                labels=label_set.labels, model_ids=tuple(store.model_ids),
                config=cfg.as_dict(), best_epoch=epoch, best_dev_f1=dev_f1,
            )

        ckpt_io.rotate_checkpoints(ckpt_dir, cfg.checkpoint_keep)
        ckpt_io.save_checkpoint(
            ckpt_io.checkpoint_path(ckpt_dir, epoch),
            epoch=epoch, dev_f1=dev_f1, params=params,
            labels=label_set.labels, model_ids=tuple(store.model_ids),
            config=cfg.as_dict(), best_epoch=best_epoch, best_dev_f1=best_f1,
            best_params=best_params, opt_state=opt_state, opt_step=opt_step,
            rng_state=rng.bit_generator.state,
        )

        stats = EpochStats(
            epoch=epoch,
            train_loss=float(losses.mean()),
            dev_precision=metrics.precision,
            dev_recall=metrics.recall,
            dev_f1=dev_f1,
        )
        report.epochs.append(stats)
        if log is not None:
            log(
                f"epoch {epoch:4d}  train_loss {stats.train_loss:.4f}  "
                f"dev P {stats.dev_precision:.4f} R {stats.dev_recall:.4f} "
                f"F1 {stats.dev_f1:.4f}"
            )

    report.best_epoch = best_epoch
    report.best_dev_f1 = best_f1
    report.wall_time_s = time.perf_counter() - t0
    return best_params, report
