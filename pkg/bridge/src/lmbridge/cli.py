"""Command-line entry points: ``serve`` and ``finetune``."""

from __future__ import annotations

import argparse
import sys

from .finetune import DEFAULT_BATCH, DEFAULT_LR, EmptyCorpus, finetune
from .server import load_model, serve


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lmbridge")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="answer next-token queries over stdio")
    p.add_argument("--model", required=True, help="local model directory")

    p = sub.add_parser("finetune", help="fine-tune a base model on a corpus")
    p.add_argument("--corpus", required=True, help="directory of training documents")
    p.add_argument("--out", required=True, help="checkpoint output directory")
    p.add_argument("--base", required=True,
                   help="base model directory (or a previous checkpoint to resume)")
    p.add_argument("--lr", type=float, default=DEFAULT_LR)
    p.add_argument("--batch", type=int, default=DEFAULT_BATCH)
    p.add_argument("--steps", type=int, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "serve":
        try:
            handle = load_model(args.model)
        except Exception as exc:
            print(f"error: could not load model from {args.model}: {exc}",
                  file=sys.stderr)
            return 1
        return serve(handle)
    if args.command == "finetune":
        try:
            result = finetune(args.corpus, args.out, args.base,
                              lr=args.lr, batch_size=args.batch, steps=args.steps)
        except (EmptyCorpus, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        first = result.losses[0] if result.losses else float("nan")
        last = result.losses[-1] if result.losses else float("nan")
        print(f"fine-tuned for {result.steps} steps "
              f"(loss {first:.4f} -> {last:.4f}) -> {result.out_dir}")
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
