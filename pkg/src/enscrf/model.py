"""Full sequence-labeling model: CRF head plus optional per-model projections.

Without projections the input to the CRF is the plain ensemble average of
the per-model word matrices, which all share one dim. With a projection
dim set, each model gets a trainable linear map to the common dim and the
ensemble averages the projected matrices; this is the supported way to
combine encoders of different widths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import crf
from .corpus import LabelSet, Sentence, bio_to_spans, EntitySpan
from .embfile import EmbeddingStore, ensemble_average
from .errors import DataError


@dataclass
class ModelParams:
    """Everything trainable: the CRF head and (optionally) projections."""

    head: crf.CrfParams
    proj: dict[str, np.ndarray] = field(default_factory=dict)  # model -> (d_m, d)

    def arrays(self) -> dict[str, np.ndarray]:
        out = self.head.arrays()
        for m in sorted(self.proj):
            out[f"proj.{m}"] = self.proj[m]
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(self.head.copy(), {m: p.copy() for m, p in self.proj.items()})


def init_model_params(
    n_tags: int,
    input_dims: dict[str, int],
    proj_dim: int | None,
    rng: np.random.Generator,
) -> ModelParams:
    """Draw initial parameters; RNG order is head first, then projections
    in sorted model order (fixed so runs are reproducible)."""
    dims = set(input_dims.values())
    if proj_dim is None:
        if len(dims) != 1:
            raise DataError(
                f"embedding dims differ across models ({input_dims}); set a "
                "projection dim to combine them"
            )
        return ModelParams(crf.init_crf_params(n_tags, dims.pop(), rng))
    head = crf.init_crf_params(n_tags, proj_dim, rng)
    proj = {}
    for m in sorted(input_dims):
        d_m = input_dims[m]
        bound = np.sqrt(6.0 / (d_m + proj_dim))
        proj[m] = rng.uniform(-bound, bound, size=(d_m, proj_dim))
    return ModelParams(head, proj)


def combine_inputs(
    mats: Sequence[np.ndarray], model_ids: Sequence[str], params: ModelParams
) -> np.ndarray:
    """Word matrix fed to the CRF: ensemble of (projected) model matrices."""
    if not params.proj:
        return ensemble_average(mats)
    try:
        projected = [mats[i] @ params.proj[m] for i, m in enumerate(model_ids)]
    except KeyError as e:
        raise DataError(f"no projection for model {e}") from None
    return ensemble_average(projected)


def masks_for(label_set: LabelSet, constrained: bool):
    if not constrained:
        return None, None
    return crf.bio_transition_masks(label_set)


def decode_store(
    params: ModelParams,
    sentences: Sequence[Sentence],
    store: EmbeddingStore,
    label_set: LabelSet,
    constrained: bool = False,
    strict_bio: bool = False,
) -> list[list[EntitySpan]]:
    """Viterbi-decode every sentence into entity spans."""
    trans_mask, start_mask = masks_for(label_set, constrained)
    out = []
    for sent in sentences:
        mats = store.matrices(sent.id)
        if store.n_words(sent.id) != len(sent):
            raise DataError(
                f"sentence {sent.id!r}: {len(sent)} words but embeddings have "
                f"{store.n_words(sent.id)} rows"
            )
        vecs = combine_inputs(mats, store.model_ids, params)
        lat = crf.emission_scores(vecs, params.head, trans_mask, start_mask)
        result = crf.viterbi(lat)
        out.append(bio_to_spans(result.tags, label_set, strict=strict_bio))
    return out
