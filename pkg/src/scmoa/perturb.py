"""Input diversity: N semantic-preserving rephrasings with protected-token validation."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import prompts
from .agents import AgentClient, AgentSpec, ChatRequest
from .core import Problem, ScmoaError

RETRY_CAP = 3

DEFAULT_UNITS = ("eV", "m/s", "kg", "K", "mol", "J", "Hz", "nm", "°C")

CONTROLLED_TYPES = ("lexical", "syntactic", "discourse", "register", "compression")


class PerturbationMode(str, enum.Enum):
    SPUQ = "spuq_freeform"
    CONTROLLED = "controlled_taxonomy"
    PERSONA = "persona"


class GeneratorMalformedOutput(ScmoaError):
    pass


@dataclass(frozen=True)
class Perturbation:
    index: int
    text: str
    mode: PerturbationMode
    controlled_type: Optional[str] = None
    validated: bool = True
    regeneration_count: int = 0
    persona: Optional[str] = None
    persona_prompt: Optional[str] = None
    fallback: bool = False

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "text": self.text,
            "mode": self.mode.value,
            "controlled_type": self.controlled_type,
            "validated": self.validated,
            "regeneration_count": self.regeneration_count,
            "persona": self.persona,
            "persona_prompt": self.persona_prompt,
            "fallback": self.fallback,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Perturbation":
        return cls(
            d["index"],
            d["text"],
            PerturbationMode(d["mode"]),
            d.get("controlled_type"),
            d.get("validated", True),
            d.get("regeneration_count", 0),
            d.get("persona"),
            d.get("persona_prompt"),
            d.get("fallback", False),
        )


@dataclass(frozen=True)
class ProtectedTokenSet:
    numbers: tuple[str, ...] = ()
    code_blocks: tuple[str, ...] = ()
    units: tuple[str, ...] = ()

    def all(self) -> tuple[str, ...]:
        return self.numbers + self.code_blocks + self.units


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    missing: tuple[str, ...] = field(default_factory=tuple)


_FENCED = re.compile(r"```[^\n`]*\n(.*?)\n?```", re.DOTALL)
# A sign only counts when it is not glued to a preceding word/number ("3-4" is two numbers).
_NUMBER = re.compile(r"(?<![\w.])[-+]?(?:\d+\.\d+|\d+|\.\d+)(?:[eE][-+]?\d+)?|(?:\d+\.\d+|\d+|\.\d+)(?:[eE][-+]?\d+)?")


def _dedupe(items: Iterable[str]) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for it in items:
        seen.setdefault(it, None)
    return tuple(seen)


def extract_protected_tokens(problem_text: str, units: Iterable[str] = DEFAULT_UNITS) -> ProtectedTokenSet:
    code_blocks = _dedupe(_FENCED.findall(problem_text))
    numbers = _dedupe(_NUMBER.findall(problem_text))
    found_units = []
    for u in units:
        if re.search(rf"(?<![A-Za-z]){re.escape(u)}(?![A-Za-z])", problem_text):
            found_units.append(u)
    return ProtectedTokenSet(numbers, code_blocks, tuple(found_units))


def validate_paraphrase(original_tokens: ProtectedTokenSet, paraphrase: str) -> ValidationReport:
    missing = tuple(t for t in original_tokens.all() if t not in paraphrase)
    return ValidationReport(not missing, missing)


def parse_json_list(text: str) -> list:
    """First well-formed JSON array embedded in ``text`` (surrounding prose allowed)."""
    dec = json.JSONDecoder()
    for m in re.finditer(r"\[", text):
        try:
            obj, _ = dec.raw_decode(text, m.start())
        except json.JSONDecodeError:
            continue
        if isinstance(obj, list):
            return obj
    raise GeneratorMalformedOutput("no JSON list in generator output")


def _regen_tag(item: int, attempt: int) -> str:
    return prompts.catalog()["regeneration_tag"].format(item=item, attempt=attempt)


def _spuq_request(problem: Problem, n: int, generator: AgentSpec, tag: Optional[str] = None) -> ChatRequest:
    system = prompts.catalog()["spuq"]["system"].format(n=n)
    user = problem.text if tag is None else f"{problem.text}\n\n{tag}"
    return ChatRequest(system, user, generator)


def _controlled_request(problem: Problem, ctype: str, generator: AgentSpec, tag: Optional[str] = None) -> ChatRequest:
    c = prompts.catalog()["controlled"]
    system = c["system"].format(operation=ctype, instruction=c["types"][ctype])
    user = problem.text if tag is None else f"{problem.text}\n\n{tag}"
    return ChatRequest(system, user, generator)


def _spuq_batch(problem, n, generator, client) -> list:
    for attempt in range(RETRY_CAP + 1):
        tag = None if attempt == 0 else _regen_tag("all", attempt)
        resp = client.complete(_spuq_request(problem, n, generator, tag))
        try:
            return parse_json_list(resp.text)
        except GeneratorMalformedOutput:
            continue
    return []


def _single_spuq(problem, generator, client, item: int, attempt: int) -> Optional[str]:
    resp = client.complete(_spuq_request(problem, 1, generator, _regen_tag(item, attempt)))
    try:
        items = parse_json_list(resp.text)
    except GeneratorMalformedOutput:
        return None
    return items[0] if items and isinstance(items[0], str) else None


def generate_perturbations(
    problem: Problem,
    N: int,
    mode: PerturbationMode | str,
    generator: AgentSpec,
    client: AgentClient,
    units: Iterable[str] = DEFAULT_UNITS,
    retry_cap: int = RETRY_CAP,
) -> list[Perturbation]:
    """Build the N perturbed inputs for one problem.

    A candidate that drops a protected token is regenerated on its own (a
    regeneration tag makes the retried request cache-distinct); after
    ``retry_cap`` failures the original text is used instead.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    mode = PerturbationMode(mode)
    if mode is PerturbationMode.PERSONA:
        kind = problem.kind.value
        ps = prompts.personas(kind)
        return [
            Perturbation(i + 1, problem.text, mode, persona=ps[i % len(ps)][0], persona_prompt=ps[i % len(ps)][1])
            for i in range(N)
        ]

    tokens = extract_protected_tokens(problem.text, units)
    out = []
    if mode is PerturbationMode.SPUQ:
        batch = _spuq_batch(problem, N, generator, client)
        for i in range(1, N + 1):
            cand = batch[i - 1] if i - 1 < len(batch) and isinstance(batch[i - 1], str) else None
            regen = 0
            while cand is None or not validate_paraphrase(tokens, cand).passed:
                if regen == retry_cap:
                    cand = None
                    break
                regen += 1
                cand = _single_spuq(problem, generator, client, i, regen)
            if cand is None:
                out.append(Perturbation(i, problem.text, mode, validated=True, regeneration_count=regen, fallback=True))
            else:
                out.append(Perturbation(i, cand.strip(), mode, validated=True, regeneration_count=regen))
        return out

    for i in range(1, N + 1):
        ctype = CONTROLLED_TYPES[(i - 1) % len(CONTROLLED_TYPES)]
        regen = 0
        cand = client.complete(_controlled_request(problem, ctype, generator)).text.strip()
        while not cand or not validate_paraphrase(tokens, cand).passed:
            if regen == retry_cap:
                cand = None
                break
            regen += 1
            cand = client.complete(_controlled_request(problem, ctype, generator, _regen_tag(i, regen))).text.strip()
        if cand is None:
            out.append(Perturbation(i, problem.text, mode, ctype, True, regen, fallback=True))
        else:
            out.append(Perturbation(i, cand, mode, ctype, True, regen))
    return out
