"""Embedding directory discovery and store assembly (with subword pooling)."""

from pathlib import Path

import numpy as np
import pytest

from enscrf import (
    DataError,
    Tokenization,
    build_store,
    discover_models,
    pool_subwords,
    tokenization_path_for,
    write_embedding_file,
    write_tokenization_file,
)


def test_tokenization_path_for():
    assert tokenization_path_for(Path("d/xlmr.dev.emb")) == Path("d/xlmr.dev.tok.jsonl")
    assert tokenization_path_for(Path("xlmr.emb")) == Path("xlmr.tok.jsonl")


def test_discover_models(tmp_path):
    for name in ("m1.train.emb", "m1.dev.emb", "m2.emb", "notes.txt"):
        (tmp_path / name).write_bytes(b"")
    got = discover_models(tmp_path)
    assert sorted(got) == ["m1", "m2"]
    assert [p.name for p in got["m1"]] == ["m1.dev.emb", "m1.train.emb"]
    assert [p.name for p in got["m2"]] == ["m2.emb"]


def test_discover_models_empty(tmp_path):
    with pytest.raises(DataError):
        discover_models(tmp_path)


def test_build_store_merges_splits(tmp_path):
    rng = np.random.default_rng(0)
    train = {"a": rng.standard_normal((2, 4)).astype(np.float32)}
    dev = {"b": rng.standard_normal((3, 4)).astype(np.float32)}
    for model in ("m1", "m2"):
        write_embedding_file(train, tmp_path / f"{model}.train.emb")
        write_embedding_file(dev, tmp_path / f"{model}.dev.emb")
    store = build_store(tmp_path)
    assert store.model_ids == ("m1", "m2")
    assert store.sentence_ids == ["a", "b"]
    assert store.n_words("b") == 3


def test_build_store_rejects_duplicate_sentence_across_splits(tmp_path):
    mats = {"a": np.ones((2, 4), dtype=np.float32)}
    write_embedding_file(mats, tmp_path / "m1.train.emb")
    write_embedding_file(mats, tmp_path / "m1.dev.emb")
    with pytest.raises(DataError, match="two files"):
        build_store(tmp_path)


def test_build_store_model_filter(tmp_path):
    mats = {"a": np.ones((2, 4), dtype=np.float32)}
    write_embedding_file(mats, tmp_path / "m1.emb")
    write_embedding_file(mats, tmp_path / "m2.emb")
    store = build_store(tmp_path, models=["m2"])
    assert store.model_ids == ("m2",)
    with pytest.raises(DataError, match="ghost"):
        build_store(tmp_path, models=["ghost"])


def test_build_store_pools_with_sibling_tokenization(tmp_path):
    # model "sub" stores piece-level rows plus a tokenization; model "word"
    # stores word-level rows directly. Both must land on 2 words.
    rng = np.random.default_rng(1)
    piece_rows = rng.standard_normal((3, 4)).astype(np.float32)
    tok = Tokenization("sub", ["he", "llo", "world"], [0, 0, 1])
    write_embedding_file({"a": piece_rows}, tmp_path / "sub.emb")
    write_tokenization_file({"a": tok}, tmp_path / "sub.tok.jsonl")
    word_rows = rng.standard_normal((2, 4)).astype(np.float32)
    write_embedding_file({"a": word_rows}, tmp_path / "word.emb")

    store = build_store(tmp_path, pooling="mean")
    np.testing.assert_allclose(store.matrices("a")[0],
                               pool_subwords(piece_rows, tok, "mean"))
    np.testing.assert_allclose(store.matrices("a")[1], word_rows)

    first = build_store(tmp_path, pooling="first")
    np.testing.assert_allclose(first.matrices("a")[0], piece_rows[[0, 2]])


def test_build_store_requires_tok_coverage(tmp_path):
    rng = np.random.default_rng(2)
    write_embedding_file({"a": rng.standard_normal((3, 4)).astype(np.float32),
                          "b": rng.standard_normal((2, 4)).astype(np.float32)},
                         tmp_path / "sub.emb")
    # tokenization file misses sentence "b"
    write_tokenization_file({"a": Tokenization("sub", ["x", "y", "z"], [0, 0, 1])},
                            tmp_path / "sub.tok.jsonl")
    with pytest.raises(DataError, match="b"):
        build_store(tmp_path)


def test_build_store_mixed_dims_flag(tmp_path):
    write_embedding_file({"a": np.ones((2, 4), dtype=np.float32)}, tmp_path / "m1.emb")
    write_embedding_file({"a": np.ones((2, 6), dtype=np.float32)}, tmp_path / "m2.emb")
    with pytest.raises(DataError):
        build_store(tmp_path)
    store = build_store(tmp_path, allow_mixed_dim=True)
    assert store.dims == {"m1": 4, "m2": 6}
