"""Corpus ingestion, metrics reporting, and the staged pipeline runner.

Stages write into their own subdirectories of the output directory and
are resumable: a stage is skipped when its stamp is newer than everything
it consumes.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, TypeVar

from . import data as bundled_data
from .canon import UnparsableSample, bfs_restructure, emit_canonical, restore
from .graph import GraphError, build_graph, metrics, METRICS_CSV_HEADER
from .harness import crash_signature, is_static_valid, run_validator, static_check, CRASH, TIMEOUT
from .sampling import NGramModel, SamplerConfig, generate, ngram_train
from .simplify import (DuplicateOriginalName, SimplifyPolicy, is_flat_no_deps,
                       rename_identifiers, simplify)
from .syntax import (LENIENT, ParseError, SyntaxTree, decode_model_bytes, parse,
                     print_tree, strip_comments, tokenize)

_T = TypeVar("_T")
_R = TypeVar("_R")

__all__ = [
    "CorpusManifest",
    "ManifestEntry",
    "PipelineConfig",
    "DirectoryNotFound",
    "StageFailure",
    "ingest",
    "canonicalize_tree",
    "report_metrics",
    "run_pipeline",
    "STAGES",
]

STAGES = ("ingest", "simplify", "canon", "train", "sample", "restore", "check", "report")


class DirectoryNotFound(Exception):
    pass


def _pmap(fn: Callable[[_T], _R], items: Iterable[_T], jobs: int) -> list[_R]:
    """Order-preserving map over a worker pool (serial when jobs <= 1)."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


class StageFailure(Exception):
    """A pipeline stage failed; the message points at the failing artifact."""


@dataclass
class ManifestEntry:
    path: str
    sha256: str
    parse_status: str  # "ok" | "error:<code>"
    flat_status: str  # "flat" | "nonflat" | ""
    simplify_status: str  # "ok" | "empty-after-simplify" | ""
    tokens_before: int
    tokens_after: int

    @property
    def accepted(self) -> bool:
        return (self.parse_status == "ok" and self.flat_status == "flat"
                and self.simplify_status == "ok")


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def accepted_paths(self) -> list[str]:
        return [e.path for e in self.entries if e.accepted]

    def to_json(self) -> str:
        return json.dumps({"entries": [vars(e) for e in self.entries]}, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "CorpusManifest":
        payload = json.loads(text)
        return CorpusManifest([ManifestEntry(**e) for e in payload["entries"]])


def ingest(corpus_dir: str | Path, policy: SimplifyPolicy | None = None,
           jobs: int = 1) -> CorpusManifest:
    """Discover ``.mdl`` files, parse leniently, filter non-flat models,
    and record per-file status; a single bad file never aborts the run."""
    root = Path(corpus_dir)
    if not root.is_dir():
        raise DirectoryNotFound(f"corpus directory not found: {root}")
    policy = policy or SimplifyPolicy()

    def scan(path: Path) -> ManifestEntry:
        raw = path.read_bytes()
        digest = hashlib.sha256(raw).hexdigest()
        text, _ = decode_model_bytes(raw)
        if policy.strip_comments:
            text = strip_comments(text)
        tokens_before = len(tokenize(text))
        rel = str(path.relative_to(root))
        try:
            tree = parse(text, LENIENT)
        except ParseError as exc:
            return ManifestEntry(rel, digest, f"error:{exc.code}", "", "",
                                 tokens_before, 0)
        flat = is_flat_no_deps(tree)
        result = simplify(tree, policy)
        tokens_after = len(tokenize(print_tree(result.tree)))
        return ManifestEntry(
            rel, digest, "ok",
            "flat" if flat.flat else "nonflat",
            "empty-after-simplify" if result.empty_after_simplify else "ok",
            tokens_before, tokens_after)

    return CorpusManifest(_pmap(scan, sorted(root.rglob("*.mdl")), jobs))


def canonicalize_tree(tree: SyntaxTree) -> tuple[str, dict[str, str]]:
    """Simplified tree -> canonical text with renamed identifiers.

    Restructures first, renames by emission order, then re-extracts so
    the emitted document carries the short names throughout.
    """
    g = build_graph(tree, LENIENT)
    order = [b.name for b in bfs_restructure(g).blocks]
    renamed, rename_map = rename_identifiers(tree, order)
    doc = bfs_restructure(build_graph(renamed, LENIENT))
    return emit_canonical(doc), dict(rename_map.pairs)


def report_metrics(named_trees: list[tuple[str, SyntaxTree]]) -> str:
    """One CSV row per model with the four structural metrics."""
    rows = [METRICS_CSV_HEADER]
    for name, tree in named_trees:
        g = build_graph(tree, LENIENT)
        rows.append(metrics(g).csv_row(name))
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# Pipeline configuration
# ---------------------------------------------------------------------------

@dataclass
class PipelineConfig:
    corpus_dir: Path
    out_dir: Path
    policy: SimplifyPolicy = field(default_factory=SimplifyPolicy)
    ngram_order: int = 5
    sample_count: int = 100
    sampler: SamplerConfig = field(default_factory=lambda: SamplerConfig(
        temperature=1.0, nucleus=0.9, max_tokens=400))
    validator_cmd: str | None = None
    timeout_s: float = 30.0
    jobs: int = 1

    def __post_init__(self):
        self.corpus_dir = Path(self.corpus_dir)
        self.out_dir = Path(self.out_dir)
        if not self.corpus_dir.is_dir():
            raise DirectoryNotFound(f"corpus directory not found: {self.corpus_dir}")

    @staticmethod
    def from_file(path: str | Path, **overrides) -> "PipelineConfig":
        """Load from ``key = value`` lines.

        Keys: corpus_dir, out_dir, policy (path), ngram_order, sample_count,
        seed_text, temperature, nucleus, max_tokens, seed, validator_cmd,
        timeout_s, jobs. ``corpus_dir = builtin`` selects the bundled corpus.
        """
        raw: dict[str, str] = {}
        base = Path(path).parent
        with open(path, encoding="utf-8") as fh:
            for line_text in fh:
                line_text = line_text.strip()
                if not line_text or line_text.startswith("#") or "=" not in line_text:
                    continue
                key, _, value = line_text.partition("=")
                raw[key.strip()] = value.strip()
        raw.update({k: str(v) for k, v in overrides.items() if v is not None})

        def resolve(p: str) -> Path:
            if p == "builtin":
                return bundled_data.corpus50_dir()
            candidate = Path(p)
            return candidate if candidate.is_absolute() else base / candidate

        if "corpus_dir" not in raw or "out_dir" not in raw:
            raise ValueError("config must set corpus_dir and out_dir")
        policy = SimplifyPolicy()
        if "policy" in raw:
            policy_path = resolve(raw["policy"])
            if not policy_path.is_file():
                raise FileNotFoundError(f"policy file not found: {policy_path}")
            policy = SimplifyPolicy.from_file(str(policy_path))
        sampler = SamplerConfig(
            seed_text=raw.get("seed_text", "Model {"),
            temperature=float(raw.get("temperature", 1.0)),
            nucleus=float(raw.get("nucleus", 0.9)),
            max_tokens=int(raw.get("max_tokens", 400)),
            rng_seed=int(raw.get("seed", 0)),
        )
        return PipelineConfig(
            corpus_dir=resolve(raw["corpus_dir"]),
            out_dir=resolve(raw["out_dir"]),
            policy=policy,
            ngram_order=int(raw.get("ngram_order", 5)),
            sample_count=int(raw.get("sample_count", 100)),
            sampler=sampler,
            validator_cmd=raw.get("validator_cmd"),
            timeout_s=float(raw.get("timeout_s", 30.0)),
            jobs=int(raw.get("jobs", 1)),
        )


# ---------------------------------------------------------------------------
# Stage runner
# ---------------------------------------------------------------------------

def _stamp(stage_dir: Path) -> Path:
    return stage_dir / ".stamp"


def _inputs_mtime(paths: list[Path]) -> float:
    mtimes = [p.stat().st_mtime for p in paths if p.exists()]
    return max(mtimes, default=0.0)


def _fresh(stage_dir: Path, inputs: list[Path]) -> bool:
    stamp = _stamp(stage_dir)
    return stamp.exists() and stamp.stat().st_mtime >= _inputs_mtime(inputs)


def _finish(stage_dir: Path) -> None:
    _stamp(stage_dir).touch()


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise StageFailure(f"{stage}: missing input {path} (run the earlier stages first)")
    return path


def run_pipeline(cfg: PipelineConfig, stages: list[str] | None = None) -> int:
    """Execute the requested stages in canonical order; 0 on success.

    Stage outputs land in per-stage subdirectories of ``cfg.out_dir``.
    A stage whose outputs are newer than its inputs is skipped, so reruns
    are cheap and interrupted runs resume. Raises StageFailure pointing
    at the failing artifact.
    """
    selected = list(STAGES) if stages is None else [s for s in STAGES if s in stages]
    unknown = set(stages or ()) - set(STAGES)
    if unknown:
        raise ValueError(f"unknown stage(s): {sorted(unknown)}")

    dirs = {name: cfg.out_dir / f"{i:02d}-{name}" for i, name in enumerate(STAGES, 1)}
    for name in selected:
        dirs[name].mkdir(parents=True, exist_ok=True)

    corpus_files = sorted(cfg.corpus_dir.rglob("*.mdl"))

    if "ingest" in selected:
        stage = dirs["ingest"]
        if not _fresh(stage, corpus_files):
            manifest = ingest(cfg.corpus_dir, cfg.policy, jobs=cfg.jobs)
            (stage / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
            _finish(stage)

    if "simplify" in selected:
        stage = dirs["simplify"]
        inputs = corpus_files + [_stamp(dirs["ingest"])]
        if not _fresh(stage, inputs):
            manifest_path = _require(dirs["ingest"] / "manifest.json", "simplify")
            manifest = CorpusManifest.from_json(manifest_path.read_text(encoding="utf-8"))

            def simplify_one(rel: str) -> tuple[str, str]:
                raw = (cfg.corpus_dir / rel).read_bytes()
                text, _ = decode_model_bytes(raw)
                if cfg.policy.strip_comments:
                    text = strip_comments(text)
                result = simplify(parse(text, LENIENT), cfg.policy)
                return Path(rel).name, print_tree(result.tree)

            for name, text in _pmap(simplify_one, manifest.accepted_paths(), cfg.jobs):
                (stage / name).write_text(text, encoding="utf-8")
            _finish(stage)

    if "canon" in selected:
        stage = dirs["canon"]
        inputs = sorted(dirs["simplify"].glob("*.mdl")) + [_stamp(dirs["simplify"])]
        if not _fresh(stage, inputs):
            def canon_one(src: Path) -> tuple[str, str, dict[str, str]]:
                tree = parse(src.read_text(encoding="utf-8"), LENIENT)
                try:
                    text, rename_map = canonicalize_tree(tree)
                except (GraphError, DuplicateOriginalName) as exc:
                    raise StageFailure(f"canon failed on {src}: {exc}") from exc
                return src.name, text, rename_map

            renames: dict[str, dict[str, str]] = {}
            for name, text, rename_map in _pmap(
                    canon_one, sorted(dirs["simplify"].glob("*.mdl")), cfg.jobs):
                (stage / name).write_text(text, encoding="utf-8")
                renames[name] = rename_map
            (stage / "renames.json").write_text(json.dumps(renames, indent=2) + "\n",
                                                encoding="utf-8")
            _finish(stage)

    if "train" in selected:
        stage = dirs["train"]
        canon_files = sorted(dirs["canon"].glob("*.mdl"))
        if not _fresh(stage, canon_files + [_stamp(dirs["canon"])]):
            docs = [tokenize(p.read_text(encoding="utf-8")) for p in canon_files]
            if not docs:
                raise StageFailure(f"train: no canonical documents in {dirs['canon']}")
            model = ngram_train(docs, cfg.ngram_order, cfg.sampler.eot_token)
            model.save(str(stage / "ngram.json"))
            _finish(stage)

    if "sample" in selected:
        stage = dirs["sample"]
        model_path = dirs["train"] / "ngram.json"
        if not _fresh(stage, [model_path, _stamp(dirs["train"])]):
            model = NGramModel.load(str(_require(model_path, "sample")))
            rows = ["sample,completed,tokens_emitted"]
            for i in range(cfg.sample_count):
                sample_cfg = replace(cfg.sampler, rng_seed=cfg.sampler.rng_seed + i)
                result = generate(model, sample_cfg)
                name = f"sample_{i:04d}.txt"
                (stage / name).write_text(result.text + "\n", encoding="utf-8")
                rows.append(f"{name},{int(result.completed)},{result.tokens_emitted}")
            (stage / "generation.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
            _finish(stage)

    if "restore" in selected:
        stage = dirs["restore"]
        sample_files = sorted(dirs["sample"].glob("sample_*.txt"))
        if not _fresh(stage, sample_files + [_stamp(dirs["sample"])]):
            def restore_one(src: Path) -> tuple[str, str | None]:
                try:
                    tree = restore(src.read_text(encoding="utf-8").strip())
                except UnparsableSample:
                    return src.name, None
                return src.name, print_tree(tree)

            rows = ["sample,status"]
            for name, text in _pmap(restore_one, sample_files, cfg.jobs):
                if text is None:
                    rows.append(f"{name},unparsable")
                    continue
                (stage / (Path(name).stem + ".mdl")).write_text(text, encoding="utf-8")
                rows.append(f"{name},ok")
            (stage / "restore.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
            _finish(stage)

    if "check" in selected:
        stage = dirs["check"]
        restored = sorted(dirs["restore"].glob("*.mdl"))
        if not _fresh(stage, restored + [_stamp(dirs["restore"])]):
            def check_one(src: Path) -> tuple[str, bool, int, int]:
                findings = static_check(parse(src.read_text(encoding="utf-8"),
                                              LENIENT))
                errors = sum(1 for f in findings if f.severity == "error")
                warnings = sum(1 for f in findings if f.severity == "warning")
                return src.name, is_static_valid(findings), errors, warnings

            checked = _pmap(check_one, restored, cfg.jobs)
            rows = ["model,static_valid,errors,warnings"]
            for name, ok, errors, warnings in checked:
                rows.append(f"{name},{int(ok)},{errors},{warnings}")
            (stage / "check.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")

            if cfg.validator_cmd:
                valid_models = [src for src, (_, ok, _, _) in zip(restored, checked)
                                if ok]

                def validate_one(src: Path) -> dict:
                    outcome = run_validator(src, cfg.validator_cmd, cfg.timeout_s)
                    sig = (crash_signature(outcome)
                           if outcome.kind in (CRASH, TIMEOUT) else None)
                    return {"model": str(src), "kind": outcome.kind,
                            "exit": outcome.exit_detail, "diag": outcome.diag,
                            "sig": sig, "ms": int(outcome.wall_time_s * 1000)}

                with open(stage / "outcomes.jsonl", "w", encoding="utf-8") as fh:
                    for record in _pmap(validate_one, valid_models, cfg.jobs):
                        fh.write(json.dumps(record) + "\n")
            _finish(stage)

    if "report" in selected:
        stage = dirs["report"]
        inputs = [_stamp(dirs["check"]), _stamp(dirs["simplify"])]
        if not _fresh(stage, inputs):
            corpus_trees = []
            for src in sorted(dirs["simplify"].glob("*.mdl")):
                corpus_trees.append((src.name, parse(src.read_text(encoding="utf-8"),
                                                     LENIENT)))
            (stage / "corpus_metrics.csv").write_text(report_metrics(corpus_trees),
                                                      encoding="utf-8")
            valid_names = set()
            check_csv = dirs["check"] / "check.csv"
            if check_csv.exists():
                for row in check_csv.read_text(encoding="utf-8").strip().splitlines()[1:]:
                    name, ok = row.split(",")[:2]
                    if ok == "1":
                        valid_names.add(name)
            sample_trees = []
            for src in sorted(dirs["restore"].glob("*.mdl")):
                if src.name not in valid_names:
                    continue
                sample_trees.append((src.name, parse(src.read_text(encoding="utf-8"),
                                                     LENIENT)))
            (stage / "sample_metrics.csv").write_text(report_metrics(sample_trees),
                                                      encoding="utf-8")
            summary = _summarize(dirs)
            (stage / "summary.txt").write_text(summary, encoding="utf-8")
            _finish(stage)

    return 0


def _summarize(dirs: dict[str, Path]) -> str:
    lines = []
    manifest_path = dirs["ingest"] / "manifest.json"
    if manifest_path.exists():
        manifest = CorpusManifest.from_json(manifest_path.read_text(encoding="utf-8"))
        accepted = len(manifest.accepted_paths())
        before = sum(e.tokens_before for e in manifest.entries if e.accepted)
        after = sum(e.tokens_after for e in manifest.entries if e.accepted)
        lines.append(f"corpus files      {len(manifest.entries)}")
        lines.append(f"accepted          {accepted}")
        lines.append(f"tokens before     {before}")
        lines.append(f"tokens after      {after}")
        if before:
            lines.append(f"token reduction   {100.0 * (1 - after / max(1, before)):.1f}%")
        canon_files = sorted(dirs["canon"].glob("*.mdl"))
        if canon_files:
            renamed = sum(len(tokenize(p.read_text(encoding="utf-8")))
                          for p in canon_files)
            lines.append(f"tokens canonical  {renamed}")
            if before:
                lines.append(f"reduction w/ rename {100.0 * (1 - renamed / max(1, before)):.1f}%")
    check_csv = dirs["check"] / "check.csv"
    if check_csv.exists():
        rows = check_csv.read_text(encoding="utf-8").strip().splitlines()[1:]
        total = len(rows)
        valid = sum(1 for r in rows if r.split(",")[1] == "1")
        lines.append(f"restored samples  {total}")
        lines.append(f"static valid      {valid}")
        if total:
            lines.append(f"valid fraction    {100.0 * valid / total:.1f}%")
    return "\n".join(lines) + "\n"
