"""Bundled data: a 50-model synthetic corpus of flat primitive-block
models (so the full pipeline runs offline) and test fixtures.

Regenerate with tools/gen_corpus.py; files are committed so consumers do
not need the generator.
"""

from __future__ import annotations

from pathlib import Path

_HERE = Path(__file__).parent


def corpus50_dir() -> Path:
    """Directory holding the bundled 50-model synthetic corpus."""
    return _HERE / "corpus50"


def fixture_path(name: str) -> Path:
    """Path of a bundled fixture file, e.g. ``export_style.mdl``."""
    return _HERE / "fixtures" / name
