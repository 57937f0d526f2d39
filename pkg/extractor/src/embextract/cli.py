"""Command line front end: encode a dataset and dump embedding files."""

from __future__ import annotations

import argparse
import sys
import warnings

from .encoders import DEFAULT_MODELS, TOY_DIM
from .errors import ExtractError, SkippedSentenceWarning
from .extract import ExtractorConfig, extract


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="embextract",
                description="Encode a JSONL dataset with several models and "
                            "write one EMB1 + tokenization file pair per model.")
    p.add_argument("--data", required=True, help="dataset JSONL (id + words)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--models", default=",".join(DEFAULT_MODELS),
                   help="comma-separated model identifiers")
    p.add_argument("--dim", type=int, default=TOY_DIM,
                   help="vector width for the offline toy encoders")
    p.add_argument("--max-len", type=int, default=512,
                   help="skip sentences longer than this in pieces")
    p.add_argument("--layer", default="last",
                   help="'last' or a hidden-layer index (real encoders)")
    p.add_argument("--device", default="cpu")
    return p


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    layer = args.layer if args.layer == "last" else int(args.layer)
    models = tuple(m.strip() for m in args.models.split(",") if m.strip())
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", SkippedSentenceWarning)
            report = extract(ExtractorConfig(
                data_path=args.data, out_dir=args.out, models=models,
                layer=layer, device=args.device,
                max_seq_len=args.max_len, dim=args.dim,
            ))
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        for m, (emb_path, tok_path) in report.files.items():
            print(f"{m}: {report.n_sentences} sentences -> {emb_path} + {tok_path}")
        if report.skipped:
            print(f"skipped {len(report.skipped)} sentence(s): "
                  + ", ".join(report.skipped), file=sys.stderr)
        return 0
    except ExtractError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(run())
