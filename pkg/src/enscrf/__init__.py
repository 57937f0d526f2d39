"""Ensemble contextual embeddings + linear-chain CRF for span labeling.

The package trains a CRF tagger on top of averaged word vectors coming
from several pretrained encoders, serialized in a simple binary format so
training never needs the encoders themselves.
"""

from .align import (
    Tokenization,
    WordAlignment,
    pool_subwords,
    read_tokenization_file,
    select_min_tokenization,
    write_tokenization_file,
)
from .checkpoint import (
    Checkpoint,
    checkpoint_path,
    list_checkpoints,
    load_checkpoint,
    rotate_checkpoints,
    save_checkpoint,
)
from .corpus import (
    DEFAULT_LABELS,
    OUTSIDE,
    EntitySpan,
    LabelSet,
    Sentence,
    bio_to_spans,
    load_dataset,
    parse_dataset,
    save_dataset,
    spans_to_bio,
    validate_bio,
    write_dataset,
)
from .crf import (
    CrfParams,
    DecodeResult,
    ScoreLattice,
    bio_transition_masks,
    emission_param_gradients,
    emission_scores,
    init_crf_params,
    log_partition,
    loss_gradients,
    marginals,
    nll_loss,
    path_score,
    viterbi,
)
from .embfile import (
    EmbeddingStore,
    ensemble_average,
    read_embedding_file,
    write_embedding_file,
)
from .errors import DataError, TrainingError
from .evaluate import Metrics, entity_f1, format_table
from .model import ModelParams, decode_store, init_model_params
from .pipeline import build_store, discover_models, tokenization_path_for
from .synth import generate_synthetic
from .train import EpochStats, TrainConfig, TrainReport, fit, sentence_gradients

__version__ = "0.1.0"

__all__ = [
    "Checkpoint",
    "CrfParams",
    "DEFAULT_LABELS",
    "DataError",
    "DecodeResult",
    "EmbeddingStore",
    "EntitySpan",
    "EpochStats",
    "LabelSet",
    "Metrics",
    "ModelParams",
    "OUTSIDE",
    "ScoreLattice",
    "Sentence",
    "Tokenization",
    "TrainConfig",
    "TrainReport",
    "TrainingError",
    "WordAlignment",
    "bio_to_spans",
    "bio_transition_masks",
    "build_store",
    "checkpoint_path",
    "decode_store",
    "discover_models",
    "emission_param_gradients",
    "emission_scores",
    "ensemble_average",
    "entity_f1",
    "fit",
    "format_table",
    "generate_synthetic",
    "init_crf_params",
    "init_model_params",
    "list_checkpoints",
    "load_checkpoint",
    "log_partition",
    "loss_gradients",
    "marginals",
    "nll_loss",
    "parse_dataset",
    "path_score",
    "pool_subwords",
    "read_embedding_file",
    "read_tokenization_file",
    "rotate_checkpoints",
    "save_checkpoint",
    "save_dataset",
    "select_min_tokenization",
    "sentence_gradients",
    "spans_to_bio",
    "tokenization_path_for",
    "validate_bio",
    "viterbi",
    "write_dataset",
    "write_embedding_file",
    "write_tokenization_file",
]
