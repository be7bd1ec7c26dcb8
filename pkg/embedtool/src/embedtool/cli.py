"""Command-line front end: embedtool --corpus ... --out ... [--model --batch-size]."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .exporter import DEFAULT_BATCH_SIZE, DEFAULT_MODEL, ExportError, ExportJob, export_embeddings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embedtool",
        description="Encode a JSONL corpus with a sentence encoder and write an EMB1 file.",
    )
    parser.add_argument("--corpus", required=True, help="Corpus JSONL path.")
    parser.add_argument("--out", required=True, help="Output EMB1 path.")
    parser.add_argument(
        "--model",
        default=DEFAULT_MODEL,
        help=f"Encoder name or local path (default {DEFAULT_MODEL}).",
    )
    parser.add_argument(
        "--batch-size",
        type=int,
        default=DEFAULT_BATCH_SIZE,
        help=f"Documents per inference batch (default {DEFAULT_BATCH_SIZE}).",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = ExportJob(
            corpus=Path(args.corpus),
            out=Path(args.out),
            model=args.model,
            batch_size=args.batch_size,
        )
        n, d = export_embeddings(job)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {n} vectors of dim {d} to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
