"""Command-line surface tying the toolchain stages into reproducible runs.

Exit codes: 0 success, 1 usage/config error, 2 data error (unparsable or
malformed input), 3 stage failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import data as bundled_data
from .canon import UnparsableSample, restore
from .graph import GraphError, PathSearchBudgetExceeded
from .harness import CampaignConfig, CommandNotFound, SpawnFailure, fuzz_campaign
from .pipeline import (CorpusManifest, DirectoryNotFound, PipelineConfig,
                       StageFailure, canonicalize_tree, ingest, report_metrics,
                       run_pipeline, STAGES)
from .sampling import NGramModel, SamplerConfig, generate, ngram_train
from .simplify import DuplicateOriginalName, SimplifyPolicy, simplify
from .syntax import LENIENT, ParseError, print_tree, read_model_file, tokenize

USAGE_ERROR = 1
DATA_ERROR = 2
STAGE_ERROR = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="mdlfuzz",
                     description="corpus-to-fuzzer toolchain for MDL model files")
    parser.add_argument("--config", help="pipeline config file (key = value lines)")
    parser.add_argument("--jobs", type=int, help="worker pool size")
    parser.add_argument("--seed", type=int, help="base RNG seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="scan a corpus directory into a manifest")
    p.add_argument("corpus", help="directory of .mdl files")
    p.add_argument("--out", help="manifest path (default: stdout)")

    p = sub.add_parser("simplify", help="strip blocklisted params/sections from a model")
    p.add_argument("model")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--policy", help="policy file (key = value lines)")
    p.add_argument("--keep-param", action="append", default=[],
                   help="remove KEY from the param blocklist")
    p.add_argument("--drop-param", action="append", default=[],
                   help="add KEY to the param blocklist")

    p = sub.add_parser("canon", help="rewrite a model into canonical BFS order")
    p.add_argument("model")
    p.add_argument("--out", help="output path (default: stdout)")

    p = sub.add_parser("restore", help="reorder a canonical model to blocks-before-lines")
    p.add_argument("model")
    p.add_argument("--out", help="output path (default: stdout)")

    p = sub.add_parser("metrics", help="structural metrics CSV for model files")
    p.add_argument("models", nargs="+")

    p = sub.add_parser("train-ngram", help="train the n-gram backend on canonical files")
    p.add_argument("corpus", help="directory of canonical .mdl files")
    p.add_argument("--order", type=int, default=5)
    p.add_argument("--out", required=True, help="model JSON path")

    p = sub.add_parser("sample", help="sample candidate models from a trained backend")
    p.add_argument("--model", required=True, help="n-gram model JSON")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--nucleus", type=float, default=0.9)
    p.add_argument("--max-tokens", type=int, default=400)
    p.add_argument("--out", help="output directory (default: stdout, one per line)")

    p = sub.add_parser("fuzz", help="sampling campaign with static checks and validator")
    p.add_argument("--model", required=True, help="n-gram model JSON")
    p.add_argument("--out", required=True, help="campaign output directory")
    p.add_argument("--budget-count", type=int)
    p.add_argument("--budget-seconds", type=float)
    p.add_argument("--validator-cmd", help="command template with a {model} placeholder")
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--nucleus", type=float, default=0.9)
    p.add_argument("--max-tokens", type=int, default=400)

    p = sub.add_parser("report", help="summarize an ingest manifest")
    p.add_argument("manifest")

    p = sub.add_parser("pipeline", help="run pipeline stages from a config file")
    p.add_argument("--stages", help=f"comma-separated subset of {','.join(STAGES)}")

    p = sub.add_parser("corpus", help="export the bundled synthetic corpus")
    p.add_argument("--out", required=True, help="destination directory")

    return parser


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_tree(path: str):
    return read_model_file(path, LENIENT)


def _cmd_ingest(args) -> int:
    manifest = ingest(args.corpus)
    if not manifest.entries:
        print("warning: no .mdl files found", file=sys.stderr)
    _write_or_print(manifest.to_json(), args.out)
    return 0


def _cmd_simplify(args) -> int:
    policy = SimplifyPolicy.from_file(args.policy) if args.policy else SimplifyPolicy()
    policy = policy.with_overrides(keep_params=args.keep_param,
                                   drop_params=args.drop_param)
    result = simplify(_load_tree(args.model), policy)
    if result.empty_after_simplify:
        print(f"warning: {args.model} has no blocks after simplification",
              file=sys.stderr)
    _write_or_print(print_tree(result.tree), args.out)
    return 0


def _cmd_canon(args) -> int:
    text, _ = canonicalize_tree(_load_tree(args.model))
    _write_or_print(text, args.out)
    return 0


def _cmd_restore(args) -> int:
    raw = Path(args.model).read_text(encoding="utf-8", errors="replace")
    tree = restore(raw.strip())
    _write_or_print(print_tree(tree), args.out)
    return 0


def _cmd_metrics(args) -> int:
    named = [(Path(m).name, _load_tree(m)) for m in args.models]
    sys.stdout.write(report_metrics(named))
    return 0


def _cmd_train_ngram(args) -> int:
    files = sorted(Path(args.corpus).glob("*.mdl"))
    if not files:
        print(f"error: no .mdl files in {args.corpus}", file=sys.stderr)
        return DATA_ERROR
    docs = [tokenize(f.read_text(encoding="utf-8")) for f in files]
    model = ngram_train(docs, args.order)
    model.save(args.out)
    print(f"trained order-{args.order} model on {len(docs)} documents -> {args.out}")
    return 0


def _sampler_config(args, seed: int | None) -> SamplerConfig:
    return SamplerConfig(temperature=args.temperature, nucleus=args.nucleus,
                         max_tokens=args.max_tokens, rng_seed=seed or 0)


def _cmd_sample(args, seed: int | None) -> int:
    model = NGramModel.load(args.model)
    base = _sampler_config(args, seed)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        result = generate(model, replace(base, rng_seed=base.rng_seed + i))
        if args.out:
            path = Path(args.out) / f"sample_{i:04d}.txt"
            path.write_text(result.text + "\n", encoding="utf-8")
        else:
            sys.stdout.write(result.text + "\n")
    return 0


def _cmd_fuzz(args, seed: int | None, jobs: int | None) -> int:
    backend = NGramModel.load(args.model)
    cfg = CampaignConfig(
        backend=backend,
        sampler=_sampler_config(args, seed),
        out_dir=args.out,
        budget_count=args.budget_count,
        budget_seconds=args.budget_seconds,
        validator_cmd=args.validator_cmd,
        timeout_s=args.timeout,
        jobs=jobs or 1,
    )
    report = fuzz_campaign(cfg)
    sys.stdout.write(report.summary())
    return 0


def _cmd_report(args) -> int:
    manifest = CorpusManifest.from_json(Path(args.manifest).read_text(encoding="utf-8"))
    total = len(manifest.entries)
    accepted = manifest.accepted_paths()
    before = sum(e.tokens_before for e in manifest.entries if e.accepted)
    after = sum(e.tokens_after for e in manifest.entries if e.accepted)
    print(f"files     {total}")
    print(f"accepted  {len(accepted)}")
    print(f"tokens    {before} -> {after}")
    if before:
        print(f"reduction {100.0 * (1 - after / before):.1f}%")
    return 0


def _cmd_pipeline(args, config: str | None, seed: int | None, jobs: int | None) -> int:
    if not config:
        print("error: pipeline requires --config", file=sys.stderr)
        return USAGE_ERROR
    cfg = PipelineConfig.from_file(config, seed=seed, jobs=jobs)
    stages = args.stages.split(",") if args.stages else None
    return run_pipeline(cfg, stages)


def _cmd_corpus(args) -> int:
    dest = Path(args.out)
    dest.mkdir(parents=True, exist_ok=True)
    count = 0
    for src in sorted(bundled_data.corpus50_dir().glob("*.mdl")):
        (dest / src.name).write_text(src.read_text(encoding="utf-8"), encoding="utf-8")
        count += 1
    print(f"exported {count} models to {dest}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "ingest":
            return _cmd_ingest(args)
        if args.command == "simplify":
            return _cmd_simplify(args)
        if args.command == "canon":
            return _cmd_canon(args)
        if args.command == "restore":
            return _cmd_restore(args)
        if args.command == "metrics":
            return _cmd_metrics(args)
        if args.command == "train-ngram":
            return _cmd_train_ngram(args)
        if args.command == "sample":
            return _cmd_sample(args, args.seed)
        if args.command == "fuzz":
            return _cmd_fuzz(args, args.seed, args.jobs)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "pipeline":
            return _cmd_pipeline(args, args.config, args.seed, args.jobs)
        if args.command == "corpus":
            return _cmd_corpus(args)
        return USAGE_ERROR
    except (DirectoryNotFound, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ParseError, UnparsableSample, GraphError, DuplicateOriginalName,
            PathSearchBudgetExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except (StageFailure, CommandNotFound, SpawnFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return STAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
