import json
import sys

import pytest

from mdlfuzz.harness import (CRASH, REJECTED, TIMEOUT, VALID, CampaignConfig,
                             CommandNotFound, NotACrash,
                             ValidationOutcome, crash_signature, fuzz_campaign,
                             is_static_valid, run_validator, static_check)
from mdlfuzz.sampling import SamplerConfig, TokenDistribution
from mdlfuzz.syntax import LENIENT, parse

PY = sys.executable

WELL_FORMED = """Model {
 System {
  Block {
   BlockType Sin
   Name "a"
  }
  Block {
   BlockType Scope
   Name "b"
  }
  Line {
   SrcBlock "a"
   SrcPort 1
   DstBlock "b"
   DstPort 1
  }
 }
}"""


def errors_of(findings, rule):
    return [f for f in findings if f.rule == rule]


class TestStaticCheck:
    def test_well_formed_clean(self):
        assert static_check(parse(WELL_FORMED, LENIENT)) == []

    def test_undefined_reference(self):
        text = WELL_FORMED.replace('DstBlock "b"', 'DstBlock "ghost"')
        findings = static_check(parse(text, LENIENT))
        refs = errors_of(findings, "REF")
        assert refs and refs[0].severity == "error"
        assert "ghost" in refs[0].message
        assert not is_static_valid(findings)

    def test_scope_ports_pattern(self):
        text = """Model {
 System {
  Block {
   BlockType Scope
   Name "s"
   Floating off
   Ports 0
  }
 }
}"""
        findings = static_check(parse(text, LENIENT))
        assert [f.rule for f in findings] == ["SCOPE-PORTS"]
        assert findings[0].severity == "warning"
        assert is_static_valid(findings)  # warnings do not invalidate

    def test_scope_with_vector_ports_clean(self):
        text = """Model {
 System {
  Block {
   BlockType Scope
   Name "s"
   Floating off
   Ports [1]
  }
 }
}"""
        assert static_check(parse(text, LENIENT)) == []

    def test_block_after_line_order(self):
        text = """Model {
 System {
  Block {
   BlockType Sin
   Name "a"
  }
  Line {
   SrcBlock "a"
   SrcPort 1
   DstBlock "b"
   DstPort 1
  }
  Block {
   BlockType Scope
   Name "b"
  }
 }
}"""
        findings = static_check(parse(text, LENIENT))
        assert errors_of(findings, "ORDER")

    def test_duplicate_names(self):
        text = WELL_FORMED.replace('Name "b"', 'Name "a"')
        findings = static_check(parse(text, LENIENT))
        assert errors_of(findings, "UNIQ")

    def test_bad_port(self):
        text = WELL_FORMED.replace("DstPort 1", "DstPort 0")
        findings = static_check(parse(text, LENIENT))
        assert errors_of(findings, "PORT")

    def test_branch_reference_checked(self):
        text = """Model {
 System {
  Block {
   BlockType Sin
   Name "a"
  }
  Line {
   SrcBlock "a"
   SrcPort 1
   Branch {
    DstBlock "nope"
    DstPort 1
   }
  }
 }
}"""
        findings = static_check(parse(text, LENIENT))
        assert errors_of(findings, "REF")


class TestRunValidator:
    def test_exit_zero_valid(self, tmp_path):
        model = tmp_path / "m.mdl"
        model.write_text("Model {\n}\n")
        outcome = run_validator(model, f"{PY} -c 'import sys; sys.exit(0)' {{model}}")
        assert outcome.kind == VALID
        assert outcome.exit_detail == "0"

    def test_exit_one_rejected_with_excerpt(self, tmp_path):
        model = tmp_path / "m.mdl"
        model.write_text("Model {\n}\n")
        cmd = f"{PY} -c 'import sys; print(\"type mismatch in {{model}}\", file=sys.stderr); sys.exit(1)'"
        outcome = run_validator(model, cmd)
        assert outcome.kind == REJECTED
        assert outcome.exit_detail == "1"
        assert "type mismatch" in outcome.diag

    def test_abort_is_crash(self, tmp_path):
        model = tmp_path / "m.mdl"
        model.write_text("Model {\n}\n")
        outcome = run_validator(model, f"{PY} -c 'import os; os.abort()' {{model}}")
        assert outcome.kind == CRASH
        assert outcome.exit_detail == "SIGABRT"

    def test_timeout(self, tmp_path):
        model = tmp_path / "m.mdl"
        model.write_text("Model {\n}\n")
        outcome = run_validator(model, f"{PY} -c 'import time; time.sleep(30)' {{model}}",
                                timeout_s=0.3)
        assert outcome.kind == TIMEOUT
        assert outcome.exit_detail == "deadline"

    def test_template_requires_placeholder(self, tmp_path):
        with pytest.raises(ValueError):
            run_validator(tmp_path / "m.mdl", "true")

    def test_command_not_found(self, tmp_path):
        with pytest.raises(CommandNotFound):
            run_validator(tmp_path / "m.mdl", "/no/such/binary {model}")

    def test_model_path_substituted(self, tmp_path):
        model = tmp_path / "m.mdl"
        model.write_text("content\n")
        cmd = f"{PY} -c 'import sys; sys.exit(0 if open(sys.argv[1]).read() else 2)' {{model}}"
        assert run_validator(model, cmd).kind == VALID


class TestCrashSignature:
    def test_paths_masked(self):
        a = ValidationOutcome(CRASH, "SIGABRT", "fatal at /tmp/x1/m.mdl line 3", 0.1)
        b = ValidationOutcome(CRASH, "SIGABRT", "fatal at /home/u/m2.mdl line 7", 0.2)
        assert crash_signature(a) == crash_signature(b)

    def test_kind_distinguishes(self):
        a = ValidationOutcome(CRASH, "SIGABRT", "boom", 0.1)
        b = ValidationOutcome(TIMEOUT, "deadline", "boom", 0.1)
        assert crash_signature(a) != crash_signature(b)

    def test_different_messages_distinguish(self):
        a = ValidationOutcome(CRASH, "SIGABRT", "null deref", 0.1)
        b = ValidationOutcome(CRASH, "SIGABRT", "stack overflow", 0.1)
        assert crash_signature(a) != crash_signature(b)

    def test_not_a_crash(self):
        with pytest.raises(NotACrash):
            crash_signature(ValidationOutcome(VALID, "0", "", 0.1))

    def test_deterministic_rerun(self):
        outcome = ValidationOutcome(CRASH, "SIGSEGV", "addr 0x7f3a12 in /lib/x.so", 0.1)
        assert crash_signature(outcome) == crash_signature(outcome)


class _FixedBackend:
    """Always emits the same small valid model, then the terminator."""

    token_joiner = " "
    MODEL = ('System { Block { BlockType Sin Name "a" } '
             'Line { SrcBlock "a" SrcPort 1 DstBlock "b" DstPort 1 } '
             'Block { BlockType Scope Name "b" } } }')

    def next_distribution(self, context):
        emitted = len(context.split()) - 2  # past the "Model {" seed
        script = self.MODEL.split()
        if emitted < len(script):
            return TokenDistribution(((script[emitted], 1.0),))
        return TokenDistribution((("<endoftext>", 1.0),))


def campaign_config(tmp_path, **kw):
    defaults = dict(backend=_FixedBackend(),
                    sampler=SamplerConfig(max_tokens=100, rng_seed=0),
                    out_dir=tmp_path / "out", budget_count=10, jobs=2)
    defaults.update(kw)
    return CampaignConfig(**defaults)


class TestCampaign:
    def test_stub_backend_all_static_valid(self, tmp_path):
        report = fuzz_campaign(campaign_config(tmp_path))
        assert report.generated == 10
        assert report.static_valid == 10
        assert report.conservation_ok()

    def test_crashing_validator_single_bucket(self, tmp_path):
        cmd = f"{PY} -c 'import sys, os; print(\"boom at \" + sys.argv[1], file=sys.stderr); os.abort()' {{model}}"
        report = fuzz_campaign(campaign_config(tmp_path, validator_cmd=cmd))
        assert report.outcome_counts[CRASH] == 10
        assert len(report.buckets) == 1
        bucket = next(iter(report.buckets.values()))
        assert len(bucket.members) == 10
        assert report.conservation_ok()

    def test_alternating_outcomes_split(self, tmp_path):
        # alternate via the model index encoded in the file name
        script = tmp_path / "alt.py"
        script.write_text(
            "import sys, os\n"
            "n = int(''.join(ch for ch in os.path.basename(sys.argv[1]) if ch.isdigit()))\n"
            "if n % 2 == 0:\n"
            "    sys.exit(0)\n"
            "print('synthetic fault', file=sys.stderr)\n"
            "os.abort()\n")
        report = fuzz_campaign(campaign_config(
            tmp_path, validator_cmd=f"{PY} {script} {{model}}"))
        assert report.outcome_counts[VALID] == 5
        assert report.outcome_counts[CRASH] == 5
        assert len(report.buckets) == 1
        assert report.conservation_ok()

    def test_outcomes_jsonl_schema(self, tmp_path):
        cmd = f"{PY} -c 'import sys; sys.exit(0)' {{model}}"
        fuzz_campaign(campaign_config(tmp_path, validator_cmd=cmd, budget_count=3))
        lines = (tmp_path / "out" / "outcomes.jsonl").read_text().strip().splitlines()
        assert len(lines) == 3
        record = json.loads(lines[0])
        assert set(record) == {"model", "kind", "exit", "diag", "sig", "ms"}

    def test_bucketing_reproducible(self, tmp_path):
        cmd = f"{PY} -c 'import os, sys; print(\"dup fault\", file=sys.stderr); os.abort()' {{model}}"
        r1 = fuzz_campaign(campaign_config(tmp_path, out_dir=tmp_path / "a",
                                           validator_cmd=cmd, budget_count=4))
        r2 = fuzz_campaign(campaign_config(tmp_path, out_dir=tmp_path / "b",
                                           validator_cmd=cmd, budget_count=4))
        assert set(r1.buckets) == set(r2.buckets)

    def test_budget_required(self, tmp_path):
        with pytest.raises(ValueError):
            CampaignConfig(backend=_FixedBackend(), sampler=SamplerConfig(),
                           out_dir=tmp_path, budget_count=None, budget_seconds=None)

    def test_time_budget_bounds_campaign(self, tmp_path):
        report = fuzz_campaign(campaign_config(tmp_path, budget_count=None,
                                               budget_seconds=0.4))
        assert report.generated >= 1
        assert report.conservation_ok()

    def test_report_csv_and_summary_written(self, tmp_path):
        fuzz_campaign(campaign_config(tmp_path, budget_count=2))
        out = tmp_path / "out"
        assert (out / "report.csv").read_text().startswith("metric,value")
        assert "generated" in (out / "summary.txt").read_text()
