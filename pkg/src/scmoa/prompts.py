"""Versioned prompt catalog shipped as ``data/prompts.json``."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=None)
def catalog() -> dict:
    with resources.files("scmoa").joinpath("data/prompts.json").open(encoding="utf-8") as fh:
        return json.load(fh)


def version() -> str:
    return catalog()["version"]


def personas(kind: str) -> list[tuple[str, str]]:
    return [tuple(p) for p in catalog()["personas"][kind]]


def proposer_system(kind: str) -> str:
    return catalog()["proposer_system"][kind]
