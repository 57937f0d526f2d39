"""Training loop: optimizer semantics, rotation, determinism, resume."""

import numpy as np
import pytest

from enscrf import (
    DataError,
    EmbeddingStore,
    LabelSet,
    Sentence,
    TrainConfig,
    TrainingError,
    checkpoint_path,
    decode_store,
    entity_f1,
    generate_synthetic,
    init_model_params,
    list_checkpoints,
    load_checkpoint,
    fit,
    sentence_gradients,
    spans_to_bio,
)

LS = LabelSet()
LS2 = LabelSet(("VAR", "PARAM"))


def small_problem(n=10, dim=8, labels=LS2, noise=0.05, seed=1, n_dev=3):
    sents, store = generate_synthetic(n, dim, labels, noise, seed)
    return sents[:-n_dev], sents[-n_dev:], store


def mirror_init(cfg, store, labels):
    """Reproduce fit's parameter draw: same seed, same call order."""
    rng = np.random.default_rng(cfg.seed)
    params = init_model_params(labels.n_tags, dict(store.dims), cfg.proj_dim, rng)
    return rng, params


def test_config_validation():
    with pytest.raises(DataError):
        TrainConfig(learning_rate=-1e-4)
    with pytest.raises(DataError):
        TrainConfig(epochs=0)
    with pytest.raises(DataError):
        TrainConfig(accumulation_steps=0)
    with pytest.raises(DataError):
        TrainConfig(optimizer="adagrad")
    with pytest.raises(DataError):
        TrainConfig(pooling="max")
    with pytest.raises(DataError):
        TrainConfig(proj_dim=0)
    TrainConfig(learning_rate=0.0)  # zero step size is allowed


def test_lr_zero_keeps_initial_params(tmp_path):
    train, dev, store = small_problem()
    cfg = TrainConfig(learning_rate=0.0, epochs=1, accumulation_steps=1, seed=3)
    params, report = fit(train, dev, store, LS2, cfg, tmp_path)
    _, init = mirror_init(cfg, store, LS2)
    for name, arr in params.arrays().items():
        np.testing.assert_array_equal(arr, init.arrays()[name])
    assert len(report.epochs) == 1


def test_lr_zero_ties_resolve_to_earliest_epoch(tmp_path):
    # identical params every epoch => identical dev F1 => best must be epoch 1
    train, dev, store = small_problem()
    cfg = TrainConfig(learning_rate=0.0, epochs=3, seed=3)
    _, report = fit(train, dev, store, LS2, cfg, tmp_path)
    f1s = [e.dev_f1 for e in report.epochs]
    assert f1s[0] == f1s[1] == f1s[2]
    assert report.best_epoch == 1
    assert load_checkpoint(tmp_path / "best.ckpt").best_epoch == 1


def test_rotation_keeps_last_k(tmp_path):
    train, dev, store = small_problem()
    cfg = TrainConfig(epochs=7, checkpoint_keep=3, seed=0)
    fit(train, dev, store, LS2, cfg, tmp_path)
    names = [p.name for p in list_checkpoints(tmp_path / "checkpoints")]
    assert names == ["epoch_0005.ckpt", "epoch_0006.ckpt", "epoch_0007.ckpt"]
    assert (tmp_path / "best.ckpt").exists()


def test_sgd_accumulation_is_mean_gradient_step(tmp_path):
    train, dev, store = small_problem(n=7, n_dev=3)
    assert len(train) == 4
    cfg = TrainConfig(learning_rate=0.05, epochs=1, accumulation_steps=4,
                      optimizer="sgd", seed=9)
    got, _ = fit(train, dev, store, LS2, cfg, tmp_path)

    # one window covers the whole epoch: replay it by hand
    rng, params = mirror_init(cfg, store, LS2)
    order = rng.permutation(len(train))
    acc = {}
    for i in order:
        s = train[int(i)]
        grads, _ = sentence_gradients(
            params, [store.ensemble(s.id)], ("_combined",),
            spans_to_bio(s.spans, len(s), LS2), None, None,
        )
        for name, g in grads.items():
            if name in acc:
                acc[name] += g
            else:
                acc[name] = g.copy()
    arrays = params.arrays()
    for name in acc:
        acc[name] /= len(train)
        arrays[name] -= cfg.learning_rate * acc[name]

    for name, arr in got.arrays().items():
        np.testing.assert_array_equal(arr, arrays[name])


def test_batch_size_and_accumulation_compose(tmp_path):
    # only the product batch_size * accumulation_steps affects the math
    train, dev, store = small_problem(n=11, n_dev=3)
    a, _ = fit(train, dev, store, LS2,
               TrainConfig(epochs=2, batch_size=2, accumulation_steps=2, seed=4),
               tmp_path / "a")
    b, _ = fit(train, dev, store, LS2,
               TrainConfig(epochs=2, batch_size=4, accumulation_steps=1, seed=4),
               tmp_path / "b")
    for name, arr in a.arrays().items():
        np.testing.assert_array_equal(arr, b.arrays()[name])


def test_determinism_same_seed(tmp_path):
    train, dev, store = small_problem(n=12, n_dev=4)
    cfg = TrainConfig(epochs=3, seed=5)
    pa, ra = fit(train, dev, store, LS2, cfg, tmp_path / "a")
    pb, rb = fit(train, dev, store, LS2, cfg, tmp_path / "b")
    for name, arr in pa.arrays().items():
        np.testing.assert_array_equal(arr, pb.arrays()[name])
    da, db = ra.as_dict(), rb.as_dict()
    da.pop("wall_time_s"), db.pop("wall_time_s")
    assert da == db
    assert (tmp_path / "a/checkpoints/epoch_0003.ckpt").read_bytes() == \
           (tmp_path / "b/checkpoints/epoch_0003.ckpt").read_bytes()


def test_resume_matches_straight_run(tmp_path):
    train, dev, store = small_problem(n=12, n_dev=4)
    cfg6 = TrainConfig(epochs=6, seed=2)
    fit(train, dev, store, LS2, cfg6, tmp_path / "straight")

    cfg3 = TrainConfig(epochs=3, seed=2)
    fit(train, dev, store, LS2, cfg3, tmp_path / "half")
    _, resumed_report = fit(
        train, dev, store, LS2, cfg6, tmp_path / "resumed",
        resume_from=tmp_path / "half/checkpoints/epoch_0003.ckpt",
    )
    assert [e.epoch for e in resumed_report.epochs] == [4, 5, 6]
    assert (tmp_path / "straight/checkpoints/epoch_0006.ckpt").read_bytes() == \
           (tmp_path / "resumed/checkpoints/epoch_0006.ckpt").read_bytes()


def test_resume_validations(tmp_path):
    train, dev, store = small_problem()
    cfg = TrainConfig(epochs=2, seed=1)
    fit(train, dev, store, LS2, cfg, tmp_path / "run")
    ck = tmp_path / "run/checkpoints/epoch_0002.ckpt"

    with pytest.raises(DataError, match="labels"):
        fit(train, dev, store, LabelSet(("PARAM", "VAR")), cfg, tmp_path / "x",
            resume_from=ck)
    with pytest.raises(DataError, match="optimizer"):
        fit(train, dev, store, LS2, TrainConfig(epochs=4, optimizer="sgd"),
            tmp_path / "x", resume_from=ck)
    with pytest.raises(DataError, match="nothing to do"):
        fit(train, dev, store, LS2, TrainConfig(epochs=2, seed=1), tmp_path / "x",
            resume_from=ck)
    with pytest.raises(DataError, match="optimizer state"):
        # best.ckpt is slim on purpose; it cannot seed an adam resume
        fit(train, dev, store, LS2, TrainConfig(epochs=9, seed=1), tmp_path / "x",
            resume_from=tmp_path / "run/best.ckpt")


def test_missing_embeddings_rejected(tmp_path):
    train, dev, store = small_problem()
    extra = Sentence("ghost", ["a", "b"])
    with pytest.raises(DataError, match="ghost"):
        fit(train + [extra], dev, store, LS2, TrainConfig(epochs=1), tmp_path)
    with pytest.raises(DataError):
        fit([], dev, store, LS2, TrainConfig(epochs=1), tmp_path)
    with pytest.raises(DataError):
        fit(train, [], store, LS2, TrainConfig(epochs=1), tmp_path)


def test_non_finite_loss_aborts(tmp_path):
    # magnitudes chosen so emissions stay finite but path sums overflow
    n, d = 100, 4
    mat = np.zeros((n, d))
    mat[:, 0] = 5e307
    store = EmbeddingStore({"m": {"t1": mat}})
    sent = Sentence("t1", [f"w{i}" for i in range(n)])
    with pytest.raises(TrainingError, match="non-finite loss"):
        with np.errstate(all="ignore"):
            fit([sent], [sent], store, LS, TrainConfig(epochs=1), tmp_path)


def test_report_and_checkpoint_contents(tmp_path):
    train, dev, store = small_problem(n=12, n_dev=4)
    cfg = TrainConfig(epochs=4, checkpoint_keep=2, seed=6)
    params, report = fit(train, dev, store, LS2, cfg, tmp_path)

    assert [e.epoch for e in report.epochs] == [1, 2, 3, 4]
    assert report.wall_time_s > 0
    assert report.best_dev_f1 == max(e.dev_f1 for e in report.epochs)
    d = report.as_dict()
    assert len(d["epochs"]) == 4 and d["best_epoch"] == report.best_epoch

    full = load_checkpoint(checkpoint_path(tmp_path / "checkpoints", 4))
    assert full.opt_state is not None and full.rng_state is not None
    assert full.best_params is not None
    assert full.config == cfg.as_dict()

    best = load_checkpoint(tmp_path / "best.ckpt")
    assert best.opt_state is None and best.best_params is None
    assert best.epoch == report.best_epoch
    assert best.dev_f1 == pytest.approx(report.best_dev_f1)
    for name, arr in params.arrays().items():
        np.testing.assert_array_equal(arr, best.params.arrays()[name])
    # the best epoch's recorded stats agree with the slim checkpoint
    stats = report.epochs[report.best_epoch - 1]
    assert stats.dev_f1 == pytest.approx(best.dev_f1)


def test_projection_gradients_match_fd():
    rng = np.random.default_rng(8)
    params = init_model_params(LS2.n_tags, {"a": 6, "b": 9}, 4, rng)
    mats = [rng.standard_normal((5, 6)), rng.standard_normal((5, 9))]
    gold = [int(t) for t in rng.integers(0, LS2.n_tags, size=5)]

    grads, _ = sentence_gradients(params, mats, ("a", "b"), gold, None, None)
    h = 1e-5
    for name in ("proj.a", "proj.b", "emit_w"):
        arr = params.arrays()[name]
        flat = arr.reshape(-1)
        for j in range(0, flat.size, 7):  # sample entries, full sweep is slow
            keep = flat[j]
            flat[j] = keep + h
            _, up = sentence_gradients(params, mats, ("a", "b"), gold, None, None)
            flat[j] = keep - h
            _, dn = sentence_gradients(params, mats, ("a", "b"), gold, None, None)
            flat[j] = keep
            fd = (up - dn) / (2 * h)
            a = grads[name].reshape(-1)[j]
            assert abs(a - fd) <= max(1e-4 * max(abs(a), abs(fd)), 1e-6), name


def test_projection_training_runs(tmp_path):
    rng = np.random.default_rng(3)
    sents = [Sentence(f"p{i}", ["a", "b", "c"]) for i in range(6)]
    per_model = {
        "a": {s.id: rng.standard_normal((3, 5)) for s in sents},
        "b": {s.id: rng.standard_normal((3, 7)) for s in sents},
    }
    store = EmbeddingStore(per_model, allow_mixed_dim=True)
    cfg = TrainConfig(epochs=2, proj_dim=4, seed=0)
    params, report = fit(sents[:4], sents[4:], store, LS2, cfg, tmp_path)
    assert set(params.proj) == {"a", "b"}
    ck = load_checkpoint(tmp_path / "checkpoints/epoch_0002.ckpt")
    assert set(ck.params.proj) == {"a", "b"}
    # fit returns the best epoch's params, which the checkpoint carries too
    np.testing.assert_array_equal(ck.best_params.proj["b"], params.proj["b"])
    assert len(report.epochs) == 2


def test_separable_set_trains_to_perfect_f1(tmp_path):
    # clean synthetic data: the loss must fall monotonically early on and
    # the train split must end exactly recoverable
    train, dev, store = small_problem(n=63, dim=16, labels=LS, noise=0.02,
                                      seed=5, n_dev=3)
    cfg = TrainConfig(learning_rate=2e-3, epochs=12, seed=0)
    params, report = fit(train, dev, store, LS, cfg, tmp_path)

    losses = [e.train_loss for e in report.epochs]
    assert all(losses[i + 1] < losses[i] for i in range(9)), losses[:10]

    pred = decode_store(params, train, store, LS)
    m = entity_f1([s.spans for s in train], pred)
    assert m.f1 == 1.0
