"""Command-line entry point.

Subcommands: train, predict, eval, align-inspect, gen-synth. Exit codes:
0 success, 1 usage error, 2 data/training error. Training settings come
from CLI flags and/or a TOML/JSON config file; flags win.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .align import read_tokenization_file, select_min_tokenization
from .checkpoint import load_checkpoint
from .corpus import DEFAULT_LABELS, LabelSet, Sentence, load_dataset, save_dataset
from .errors import DataError, TrainingError
from .evaluate import entity_f1, format_table
from .model import decode_store
from .pipeline import build_store
from .synth import generate_synthetic
from .train import OPTIMIZERS, POOLING_MODES, TrainConfig, fit

USAGE_EXIT = 1
DATA_EXIT = 2


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors, per the CLI contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(USAGE_EXIT)


def _csv(value: str) -> list[str]:
    items = [v.strip() for v in value.split(",") if v.strip()]
    if not items:
        raise argparse.ArgumentTypeError("empty list")
    return items


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="enscrf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("train", help="train a CRF on embedded sentences")
    p.add_argument("--data", required=True, help="training JSONL")
    p.add_argument("--dev", required=True, help="dev JSONL for model selection")
    p.add_argument("--emb-dir", required=True, help="directory of .emb files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="TOML or JSON training config")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.add_argument("--labels", type=_csv, help="comma-separated entity types")
    p.add_argument("--models", type=_csv, help="model ids to use, in ensemble order")
    p.add_argument("--lr", type=float, dest="learning_rate")
    p.add_argument("--accumulation", type=int, dest="accumulation_steps")
    p.add_argument("--epochs", type=int)
    p.add_argument("--keep", type=int, dest="checkpoint_keep",
                   help="checkpoints kept on disk")
    p.add_argument("--optimizer", choices=OPTIMIZERS)
    p.add_argument("--seed", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--pooling", choices=POOLING_MODES)
    p.add_argument("--constrained", action=argparse.BooleanOptionalAction,
                   help="forbid invalid BIO transitions in the lattice")
    p.add_argument("--proj-dim", type=int, dest="proj_dim",
                   help="project each model to this dim before ensembling")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="decode a dataset with a trained model")
    p.add_argument("--model", required=True, help="checkpoint file")
    p.add_argument("--data", required=True)
    p.add_argument("--emb-dir", required=True)
    p.add_argument("--out", required=True, help="predictions JSONL")
    p.add_argument("--models", type=_csv)
    p.add_argument("--pooling", choices=POOLING_MODES)
    p.add_argument("--constrained", action=argparse.BooleanOptionalAction)
    p.add_argument("--strict-bio", action="store_true",
                   help="error on invalid decoded BIO instead of repairing")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("eval", help="entity-level precision/recall/F1")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--labels", type=_csv)
    p.add_argument("--json", dest="json_out", help="also write a JSON report here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("align-inspect",
                       help="compare per-model subword splits word by word")
    p.add_argument("--tok", required=True, nargs="+",
                   help="tokenization JSONL files, one per model")
    p.add_argument("--json", dest="json_out")
    p.add_argument("--verbose", action="store_true", help="per-word detail")
    p.set_defaults(func=_cmd_align_inspect)

    p = sub.add_parser("gen-synth", help="generate a synthetic dataset + embeddings")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--train-count", type=int, default=200)
    p.add_argument("--dev-count", type=int, default=50)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-models", type=int, default=3)
    p.add_argument("--scale", type=float, default=2.0,
                   help="prototype vector scale")
    p.add_argument("--labels", type=_csv)
    p.set_defaults(func=_cmd_gen_synth)

    return parser


def _label_set(args) -> LabelSet:
    return LabelSet(args.labels if getattr(args, "labels", None) else DEFAULT_LABELS)


def _load_config_file(path) -> dict:
    path = Path(path)
    try:
        if path.suffix == ".toml":
            with open(path, "rb") as f:
                raw = tomllib.load(f)
        elif path.suffix == ".json":
            with open(path, encoding="utf-8") as f:
                raw = json.load(f)
        else:
            raise DataError(f"config {path}: expected a .toml or .json file")
    except OSError as e:
        raise DataError(f"cannot read config {path}: {e.strerror}") from None
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise DataError(f"config {path}: {e}") from None
    if not isinstance(raw, dict):
        raise DataError(f"config {path}: top level must be a table/object")
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = set(raw) - known
    if unknown:
        raise DataError(f"config {path}: unknown key(s) {sorted(unknown)}")
    return raw


def _resolve_train_config(args) -> TrainConfig:
    file_cfg = _load_config_file(args.config) if args.config else {}
    merged = dict(file_cfg)
    for f in dataclasses.fields(TrainConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            merged[f.name] = value
    return TrainConfig(**merged)


def _cmd_train(args) -> int:
    cfg = _resolve_train_config(args)
    label_set = _label_set(args)
    train_sents = load_dataset(args.data, label_set)
    dev_sents = load_dataset(args.dev, label_set)
    store = build_store(
        args.emb_dir, pooling=cfg.pooling, models=args.models,
        allow_mixed_dim=cfg.proj_dim is not None,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    params, report = fit(
        train_sents, dev_sents, store, label_set, cfg, out_dir,
        resume_from=args.resume, log=print,
    )
    with open(out_dir / "report.json", "w", encoding="utf-8") as f:
        json.dump(report.as_dict(), f, indent=2)
        f.write("\n")
    print(f"best epoch {report.best_epoch} with dev F1 {report.best_dev_f1:.4f}; "
          f"model at {out_dir / 'best.ckpt'}")
    return 0


def _cmd_predict(args) -> int:
    ck = load_checkpoint(args.model)
    label_set = ck.label_set
    sents = load_dataset(args.data, label_set)
    pooling = args.pooling or ck.config.get("pooling", "mean")
    constrained = (
        args.constrained
        if args.constrained is not None
        else bool(ck.config.get("constrained", False))
    )
    models = args.models or list(ck.model_ids)
    store = build_store(
        args.emb_dir, pooling=pooling, models=models,
        allow_mixed_dim=bool(ck.params.proj),
    )
    spans = decode_store(
        ck.params, sents, store, label_set, constrained, args.strict_bio
    )
    predicted = [
        Sentence(s.id, s.words, sp, s.domain) for s, sp in zip(sents, spans)
    ]
    save_dataset(predicted, args.out)
    print(f"decoded {len(predicted)} sentences -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    label_set = _label_set(args)
    gold = load_dataset(args.gold, label_set)
    pred = load_dataset(args.pred, label_set)
    by_id = {p.id: p for p in pred}
    missing = [g.id for g in gold if g.id not in by_id]
    if missing:
        raise DataError(f"predictions missing sentence id(s) {missing[:5]}")
    if len(pred) != len(gold):
        raise DataError(
            f"gold has {len(gold)} sentences but predictions have {len(pred)}"
        )
    metrics = entity_f1(
        [g.spans for g in gold], [by_id[g.id].spans for g in gold]
    )
    print(format_table(metrics))
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as f:
            json.dump(metrics.as_dict(), f, indent=2)
            f.write("\n")
    return 0


def _cmd_align_inspect(args) -> int:
    per_model = [read_tokenization_file(p) for p in args.tok]
    ids = list(per_model[0])
    for path, toks in zip(args.tok[1:], per_model[1:]):
        if set(toks) != set(ids):
            raise DataError(f"{path}: sentence ids differ from {args.tok[0]}")

    n_words_total = 0
    n_disagreements = 0
    selection: dict[str, int] = {}
    per_sentence = []
    for sid in ids:
        toks = [m[sid] for m in per_model]
        n_words = toks[0].n_words
        alignment = select_min_tokenization(toks, n_words)
        rows = []
        for w in range(n_words):
            counts = alignment.piece_counts(w)
            if len(set(counts.values())) > 1:
                n_disagreements += 1
            chosen = alignment.chosen_model[w]
            selection[chosen] = selection.get(chosen, 0) + 1
            rows.append({"word": w, "counts": counts, "chosen": chosen})
            if args.verbose:
                detail = "  ".join(f"{m}={c}" for m, c in counts.items())
                print(f"{sid} word {w}: {detail} -> {chosen}")
        n_words_total += n_words
        per_sentence.append({"id": sid, "words": rows})

    print(f"sentences: {len(ids)}")
    print(f"words: {n_words_total}")
    print(f"words with differing piece counts: {n_disagreements}")
    for model, count in sorted(selection.items()):
        print(f"selected {model}: {count}")
    if args.json_out:
        report = {
            "sentences": len(ids),
            "words": n_words_total,
            "words_with_differing_piece_counts": n_disagreements,
            "selection_by_model": selection,
            "per_sentence": per_sentence,
        }
        with open(args.json_out, "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2)
            f.write("\n")
    return 0


def _cmd_gen_synth(args) -> int:
    if args.train_count < 1 or args.dev_count < 1:
        raise DataError("train-count and dev-count must be >= 1")
    label_set = _label_set(args)
    total = args.train_count + args.dev_count
    sentences, store = generate_synthetic(
        total, args.dim, label_set, args.noise, args.seed,
        n_models=args.n_models, scale=args.scale,
    )
    out_dir = Path(args.out)
    emb_dir = out_dir / "embs"
    emb_dir.mkdir(parents=True, exist_ok=True)
    train_sents = sentences[: args.train_count]
    dev_sents = sentences[args.train_count:]
    save_dataset(train_sents, out_dir / "train.jsonl")
    save_dataset(dev_sents, out_dir / "dev.jsonl")

    from .embfile import write_embedding_file

    for i, model in enumerate(store.model_ids):
        for split, split_sents in (("train", train_sents), ("dev", dev_sents)):
            mats = {s.id: store.matrices(s.id)[i] for s in split_sents}
            write_embedding_file(mats, emb_dir / f"{model}.{split}.emb")
    print(
        f"wrote {len(train_sents)} train / {len(dev_sents)} dev sentences and "
        f"{len(store.model_ids)} pseudo-model embedding sets to {out_dir}"
    )
    return 0


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_usage(sys.stderr)
            return USAGE_EXIT
        return args.func(args)
    except SystemExit as e:  # argparse --help (0) or usage error (1)
        return int(e.code or 0)
    except (DataError, TrainingError) as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_EXIT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
