"""Bundled offline fixtures: a 10-problem toy QA benchmark and its scripted responses."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def path(name: str) -> Path:
    return Path(str(resources.files("scmoa.fixtures").joinpath(name)))


TOY_QA = "toy_qa.jsonl"
TOY_QA_FIXTURES = "toy_qa_fixtures.json"
TOY_QA_MANIFEST = "toy_qa_manifest.json"
