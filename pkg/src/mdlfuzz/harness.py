"""Static validity checking, external-validator execution with outcome
classification, and crash bucketing.

The external validator is a configurable command (a headless compile
script, a stub, anything that consumes a model file); this module only
interprets how its process terminated. Crash triage groups failures whose
normalized diagnostics match, so buckets track failure modes rather than
individual inputs.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import shlex
import signal
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .canon import UnparsableSample, restore
from .sampling import NextTokenBackend, SamplerConfig, generate
from .syntax import Section, SyntaxTree, print_tree

__all__ = [
    "Finding",
    "ValidationOutcome",
    "CrashBucket",
    "CampaignConfig",
    "CampaignReport",
    "CommandNotFound",
    "SpawnFailure",
    "NotACrash",
    "RULE_CATALOG",
    "static_check",
    "is_static_valid",
    "run_validator",
    "crash_signature",
    "fuzz_campaign",
]

RULE_CATALOG = {
    "ORDER": "all block definitions must precede all line definitions",
    "REF": "every line endpoint must name a defined block",
    "PORT": "port indices must be integers >= 1",
    "UNIQ": "block names must be unique within a model",
    "SCOPE-PORTS": "scope block with floating off must not carry a scalar-0 Ports value",
}

VALID = "valid"
REJECTED = "rejected"
CRASH = "crash"
TIMEOUT = "timeout"


class CommandNotFound(Exception):
    pass


class SpawnFailure(Exception):
    pass


class NotACrash(ValueError):
    pass


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" | "warning"
    rule: str
    message: str
    location: str


@dataclass(frozen=True)
class ValidationOutcome:
    """How one external-validator run ended. ``exit_detail`` is the exit
    code for normal exits, the signal name for abnormal termination, or
    "deadline" for timeouts."""

    kind: str
    exit_detail: str
    diag: str
    wall_time_s: float


@dataclass
class CrashBucket:
    signature: str
    members: list[str] = field(default_factory=list)
    first_seen: float = 0.0


# ---------------------------------------------------------------------------
# Static checks
# ---------------------------------------------------------------------------

def _walk_sections(sec: Section, path: str):
    yield sec, path
    counts: dict[str, int] = {}
    for child in sec.children:
        idx = counts.get(child.name, 0)
        counts[child.name] = idx + 1
        yield from _walk_sections(child, f"{path}/{child.name}[{idx}]")


def _line_endpoints(line: Section) -> list[tuple[str, str, str]]:
    """(role, block name, path-suffix) for every endpoint of a Line."""
    endpoints = []
    for key in ("SrcBlock", "DstBlock"):
        val = line.get(key)
        if val is not None:
            endpoints.append((key, val.as_string(), ""))
    for i, branch in enumerate(line.children_named("Branch")):
        for role, name, suffix in _line_endpoints(branch):
            endpoints.append((role, name, f"/Branch[{i}]{suffix}"))
    return endpoints


def _port_findings(line: Section, path: str) -> list[Finding]:
    findings = []
    for key in ("SrcPort", "DstPort"):
        val = line.get(key)
        if val is None:
            continue
        port = val.as_int()
        if port is None or port < 1:
            findings.append(Finding("error", "PORT",
                                    f"{key} is {val.text()!r}, expected an integer >= 1",
                                    path))
    for i, branch in enumerate(line.children_named("Branch")):
        findings.extend(_port_findings(branch, f"{path}/Branch[{i}]"))
    return findings


def static_check(tree: SyntaxTree) -> list[Finding]:
    """Run the rule catalog over a candidate model.

    Errors flag models the original tool's parser would refuse; warnings
    flag known crash-prone patterns (SCOPE-PORTS reproduces a confirmed
    crasher: a scope block with floating disabled but a scalar-0 ports
    value). A model is conventionally "static-valid" when it has no
    error-severity findings.
    """
    findings: list[Finding] = []
    block_names: list[tuple[str, str]] = []

    for sec, path in _walk_sections(tree.root, tree.root.name):
        blocks = sec.children_named("Block")
        lines = sec.children_named("Line")

        if blocks and lines:
            first_line_idx = next(i for i, c in enumerate(sec.children) if c.name == "Line")
            late = [c for c in sec.children[first_line_idx:] if c.name == "Block"]
            if late:
                name = late[0].get("Name")
                label = name.as_string() if name else "<unnamed>"
                findings.append(Finding("error", "ORDER",
                                        f"block {label!r} defined after a line", path))

        for b in blocks:
            name_val = b.get("Name")
            if name_val is not None:
                block_names.append((name_val.as_string(), path))

        for i, line in enumerate(lines):
            line_path = f"{path}/Line[{i}]"
            findings.extend(_port_findings(line, line_path))

    defined = {n for n, _ in block_names}
    seen: set[str] = set()
    for name, path in block_names:
        if name in seen:
            findings.append(Finding("error", "UNIQ",
                                    f"block name {name!r} appears more than once", path))
        seen.add(name)

    for sec, path in _walk_sections(tree.root, tree.root.name):
        for i, line in enumerate(sec.children_named("Line")):
            for role, name, suffix in _line_endpoints(line):
                if name not in defined:
                    findings.append(Finding("error", "REF",
                                            f"{role} references undefined block {name!r}",
                                            f"{path}/Line[{i}]{suffix}"))

    for sec, path in _walk_sections(tree.root, tree.root.name):
        if sec.name != "Block":
            continue
        btype = sec.get("BlockType")
        if btype is None or btype.as_string() != "Scope":
            continue
        floating = sec.get("Floating")
        ports = sec.get("Ports")
        floating_off = floating is None or floating.as_string() == "off"
        if floating_off and ports is not None and ports.as_string() == "0":
            findings.append(Finding("warning", "SCOPE-PORTS",
                                    "scope with Floating off has scalar-0 Ports value "
                                    "(known toolchain crasher)", path))
    return findings


def is_static_valid(findings: list[Finding]) -> bool:
    return not any(f.severity == "error" for f in findings)


# ---------------------------------------------------------------------------
# External validator
# ---------------------------------------------------------------------------

def run_validator(model_path: str | Path, command_template: str,
                  timeout_s: float = 30.0) -> ValidationOutcome:
    """Run the external validator on one model and classify the outcome.

    ``command_template`` must contain a ``{model}`` placeholder. Exit 0 is
    valid, any other normal exit is rejected, abnormal termination is a
    crash, and exceeding the deadline is a timeout (the child is killed).
    """
    if "{model}" not in command_template:
        raise ValueError("command template must contain a {model} placeholder")
    argv = [arg.replace("{model}", str(model_path))
            for arg in shlex.split(command_template)]
    start = time.monotonic()
    try:
        proc = subprocess.run(argv, capture_output=True, timeout=timeout_s)
    except subprocess.TimeoutExpired as exc:
        stderr = exc.stderr.decode("utf-8", "replace") if exc.stderr else ""
        return ValidationOutcome(TIMEOUT, "deadline", _first_line(stderr),
                                 time.monotonic() - start)
    except FileNotFoundError as exc:
        raise CommandNotFound(f"validator command not found: {argv[0]}") from exc
    except (PermissionError, OSError) as exc:
        raise SpawnFailure(f"could not start validator: {exc}") from exc
    wall = time.monotonic() - start
    stderr = proc.stderr.decode("utf-8", "replace") if proc.stderr else ""
    if proc.returncode == 0:
        return ValidationOutcome(VALID, "0", _first_line(stderr), wall)
    if proc.returncode < 0:
        try:
            name = signal.Signals(-proc.returncode).name
        except ValueError:
            name = f"signal {-proc.returncode}"
        return ValidationOutcome(CRASH, name, _first_line(stderr), wall)
    return ValidationOutcome(REJECTED, str(proc.returncode), _first_line(stderr), wall)


def _first_line(text: str) -> str:
    for line in text.splitlines():
        if line.strip():
            return line.strip()
    return ""


_HEX = re.compile(r"0x[0-9a-fA-F]+")
_NUM = re.compile(r"\d+")
_PATH = re.compile(r"\S*[/\\]\S+")


def _normalize_diag(diag: str) -> str:
    out = _PATH.sub("<path>", diag)
    out = _HEX.sub("0x#", out)
    out = _NUM.sub("#", out)
    return out.strip()


def crash_signature(outcome: ValidationOutcome) -> str:
    """Stable signature of a failure mode: termination kind plus the
    diagnostic excerpt with digits, hex, and paths masked out."""
    if outcome.kind not in (CRASH, TIMEOUT):
        raise NotACrash(f"outcome kind {outcome.kind!r} has no crash signature")
    basis = f"{outcome.kind}|{outcome.exit_detail}|{_normalize_diag(outcome.diag)}"
    return hashlib.sha256(basis.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Campaign loop
# ---------------------------------------------------------------------------

@dataclass
class CampaignConfig:
    backend: NextTokenBackend
    sampler: SamplerConfig
    out_dir: str | Path
    budget_count: int | None = None
    budget_seconds: float | None = None
    validator_cmd: str | None = None
    timeout_s: float = 30.0
    jobs: int = os.cpu_count() or 1

    def __post_init__(self):
        if self.budget_count is None and self.budget_seconds is None:
            raise ValueError("set budget_count and/or budget_seconds")


@dataclass
class CampaignReport:
    generated: int = 0
    parse_failures: int = 0
    static_failures: int = 0
    static_valid: int = 0
    outcome_counts: dict[str, int] = field(default_factory=dict)
    buckets: dict[str, CrashBucket] = field(default_factory=dict)
    validator_enabled: bool = False

    def conservation_ok(self) -> bool:
        """generated == parse failures + static failures + terminal outcomes."""
        if self.validator_enabled:
            terminal = sum(self.outcome_counts.values())
        else:
            terminal = self.static_valid
        return self.generated == self.parse_failures + self.static_failures + terminal

    def to_csv(self) -> str:
        rows = ["metric,value",
                f"generated,{self.generated}",
                f"parse_failures,{self.parse_failures}",
                f"static_failures,{self.static_failures}",
                f"static_valid,{self.static_valid}"]
        for kind in (VALID, REJECTED, CRASH, TIMEOUT):
            rows.append(f"validator_{kind},{self.outcome_counts.get(kind, 0)}")
        for sig in sorted(self.buckets):
            rows.append(f"bucket_{sig},{len(self.buckets[sig].members)}")
        return "\n".join(rows) + "\n"

    def summary(self) -> str:
        lines = [f"generated        {self.generated}",
                 f"parse failures   {self.parse_failures}",
                 f"static failures  {self.static_failures}",
                 f"static valid     {self.static_valid}"]
        if self.validator_enabled:
            for kind in (VALID, REJECTED, CRASH, TIMEOUT):
                lines.append(f"validator {kind:<8} {self.outcome_counts.get(kind, 0)}")
            lines.append(f"crash buckets    {len(self.buckets)}")
            for sig in sorted(self.buckets):
                bucket = self.buckets[sig]
                lines.append(f"  {sig}  x{len(bucket.members)}")
        return "\n".join(lines) + "\n"


def fuzz_campaign(cfg: CampaignConfig) -> CampaignReport:
    """Generate, restore, check, optionally validate, persist, and triage
    until the budget is exhausted.

    Every sample is written to the output directory (raw token text and,
    when it parses, the restored model file); validator outcomes append to
    ``outcomes.jsonl`` one JSON object per line. Crashing and timed-out
    models are grouped into buckets by crash signature. On disk
    exhaustion the partial report is flushed before the error surfaces.
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = CampaignReport(validator_enabled=cfg.validator_cmd is not None)
    deadline = (time.monotonic() + cfg.budget_seconds
                if cfg.budget_seconds is not None else None)
    pending: list[tuple[int, Path, object]] = []  # (index, model path, future)
    records: list[dict] = []

    try:
        with ThreadPoolExecutor(max_workers=max(1, cfg.jobs)) as pool:
            index = 0
            while True:
                if cfg.budget_count is not None and index >= cfg.budget_count:
                    break
                if deadline is not None and time.monotonic() >= deadline:
                    break
                sample_cfg = replace(cfg.sampler, rng_seed=cfg.sampler.rng_seed + index)
                result = generate(cfg.backend, sample_cfg)
                report.generated += 1
                raw_path = out_dir / f"sample_{index:04d}.txt"
                raw_path.write_text(result.text + "\n", encoding="utf-8")
                try:
                    tree = restore(result.text)
                except UnparsableSample:
                    report.parse_failures += 1
                    index += 1
                    continue
                model_path = out_dir / f"sample_{index:04d}.mdl"
                model_path.write_text(print_tree(tree), encoding="utf-8")
                findings = static_check(tree)
                if not is_static_valid(findings):
                    report.static_failures += 1
                    index += 1
                    continue
                report.static_valid += 1
                if cfg.validator_cmd is not None:
                    future = pool.submit(run_validator, model_path,
                                         cfg.validator_cmd, cfg.timeout_s)
                    pending.append((index, model_path, future))
                index += 1

            for index, model_path, future in pending:
                outcome = future.result()
                report.outcome_counts[outcome.kind] = \
                    report.outcome_counts.get(outcome.kind, 0) + 1
                sig = None
                if outcome.kind in (CRASH, TIMEOUT):
                    sig = crash_signature(outcome)
                    bucket = report.buckets.get(sig)
                    if bucket is None:
                        bucket = CrashBucket(sig, [], time.time())
                        report.buckets[sig] = bucket
                    bucket.members.append(str(model_path))
                records.append({
                    "model": str(model_path),
                    "kind": outcome.kind,
                    "exit": outcome.exit_detail,
                    "diag": outcome.diag,
                    "sig": sig,
                    "ms": int(outcome.wall_time_s * 1000),
                })
    except OSError:
        _flush_report(out_dir, report, records, best_effort=True)
        raise
    _flush_report(out_dir, report, records)
    return report


def _flush_report(out_dir: Path, report: CampaignReport, records: list[dict],
                  best_effort: bool = False) -> None:
    try:
        with open(out_dir / "outcomes.jsonl", "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record) + "\n")
        (out_dir / "report.csv").write_text(report.to_csv(), encoding="utf-8")
        (out_dir / "summary.txt").write_text(report.summary(), encoding="utf-8")
    except OSError:
        if not best_effort:
            raise
