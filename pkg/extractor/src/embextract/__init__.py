"""Encoder feature dumping: subword embeddings and tokenizations to files."""

from .emb1 import write_emb1, write_tok_jsonl
from .encoders import DEFAULT_MODELS, TOY_DIM, ToyEncoder, make_encoder, sanitize_model_id
from .errors import ExtractError, ModelLoadError, SkippedSentenceWarning
from .extract import ExtractorConfig, ExtractReport, extract, read_sentences

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MODELS",
    "TOY_DIM",
    "ExtractError",
    "ExtractReport",
    "ExtractorConfig",
    "ModelLoadError",
    "SkippedSentenceWarning",
    "ToyEncoder",
    "extract",
    "make_encoder",
    "read_sentences",
    "sanitize_model_id",
    "write_emb1",
    "write_tok_jsonl",
]
