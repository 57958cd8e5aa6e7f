"""Benchmark JSONL ingestion with line-numbered errors."""

from __future__ import annotations

import json
from pathlib import Path

from .core import Problem, ScmoaError


class ParseError(ScmoaError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DuplicateId(ParseError):
    pass


class ValidationError(ParseError):
    pass


REQUIRED = ("id", "kind", "text")


def parse_problem(obj, line: int) -> Problem:
    if not isinstance(obj, dict):
        raise ParseError(line, "expected a JSON object")
    for key in REQUIRED:
        if key not in obj:
            raise ParseError(line, f"missing field {key!r}")
    if obj["kind"] not in ("qa", "code"):
        raise ParseError(line, f"unknown kind {obj['kind']!r}")
    try:
        return Problem.from_dict(obj)
    except (KeyError, TypeError) as exc:
        raise ParseError(line, f"malformed field: {exc}") from exc
    except ValueError as exc:
        raise ValidationError(line, str(exc)) from exc


def load_benchmark(path) -> list[Problem]:
    problems: list[Problem] = []
    seen: dict[str, int] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for n, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(n, f"invalid JSON: {exc.msg}") from exc
            p = parse_problem(obj, n)
            if p.id in seen:
                raise DuplicateId(n, f"id {p.id!r} already defined on line {seen[p.id]}")
            seen[p.id] = n
            problems.append(p)
    return problems


def write_benchmark(path, problems) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for p in problems:
            fh.write(json.dumps(p.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
