"""Domain types, answer extraction and record serialization shared by every module."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

SCHEMA_VERSION = 1


class ScmoaError(Exception):
    """Base class for all package errors."""


class ExtractionError(ScmoaError):
    pass


class NoAnswerLine(ExtractionError):
    pass


class NoFencedBlock(ExtractionError):
    pass


class KindMismatch(ScmoaError):
    pass


class ProblemKind(str, enum.Enum):
    QA = "qa"
    CODE = "code"


class AnswerKind(str, enum.Enum):
    LABEL = "label"
    INTEGER = "integer"
    FREE_TEXT = "free_text"
    CODE = "code"


class Visibility(str, enum.Enum):
    PUBLIC = "public"
    PRIVATE = "private"


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # keep pytest from collecting this class

    name: str
    stdin: str
    expected_stdout: str
    visibility: Visibility = Visibility.PUBLIC

    def to_dict(self) -> dict:
        return {"name": self.name, "stdin": self.stdin, "expected_stdout": self.expected_stdout}

    @classmethod
    def from_dict(cls, d: dict, visibility: Visibility) -> "TestCase":
        return cls(str(d["name"]), str(d.get("stdin", "")), str(d["expected_stdout"]), visibility)


@dataclass(frozen=True)
class Problem:
    id: str
    kind: ProblemKind
    text: str
    answer_format_hint: str = ""
    gold: Optional[str] = None
    public_tests: tuple[TestCase, ...] = ()
    private_tests: tuple[TestCase, ...] = ()

    def __post_init__(self):
        names = [t.name for t in self.public_tests + self.private_tests]
        if len(names) != len(set(names)):
            raise ValueError(f"problem {self.id}: duplicate test names")
        if self.kind is ProblemKind.CODE and not self.public_tests:
            raise ValueError(f"problem {self.id}: code problems need at least one public test")

    @property
    def answer_kind(self) -> AnswerKind:
        if self.kind is ProblemKind.CODE:
            return AnswerKind.CODE
        return answer_kind_for_hint(self.answer_format_hint)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "id": self.id,
            "kind": self.kind.value,
            "text": self.text,
            "answer_format_hint": self.answer_format_hint,
        }
        if self.gold is not None:
            d["gold"] = self.gold
        if self.kind is ProblemKind.CODE:
            d["tests"] = {
                "public": [t.to_dict() for t in self.public_tests],
                "private": [t.to_dict() for t in self.private_tests],
            }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Problem":
        tests = d.get("tests") or {}
        return cls(
            id=str(d["id"]),
            kind=ProblemKind(d["kind"]),
            text=str(d["text"]),
            answer_format_hint=str(d.get("answer_format_hint", "")),
            gold=None if d.get("gold") is None else str(d["gold"]),
            public_tests=tuple(TestCase.from_dict(t, Visibility.PUBLIC) for t in tests.get("public", [])),
            private_tests=tuple(TestCase.from_dict(t, Visibility.PRIVATE) for t in tests.get("private", [])),
        )


@dataclass(frozen=True)
class ExtractedAnswer:
    kind: AnswerKind
    normalized: str
    raw_span: str

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "normalized": self.normalized, "raw_span": self.raw_span}

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> Optional["ExtractedAnswer"]:
        if d is None:
            return None
        return cls(AnswerKind(d["kind"]), d["normalized"], d["raw_span"])


def answer_kind_for_hint(hint: str) -> AnswerKind:
    h = (hint or "").lower()
    if h.strip() == "code":
        return AnswerKind.CODE
    if "multiple choice" in h or "letter" in h:
        return AnswerKind.LABEL
    if "integer" in h:
        return AnswerKind.INTEGER
    return AnswerKind.FREE_TEXT


_ANSWER_LINE = re.compile(r"^\s*(?:\*\*)?answer(?:\*\*)?\s*:\s*(?:\*\*)?\s*(.*?)\s*(?:\*\*)?\s*$", re.IGNORECASE)
_FENCE = re.compile(r"```[^\n`]*\n(.*?)\n?```", re.DOTALL)
_EDGE_PUNCT = " \t.;,"


def _normalize(kind: AnswerKind, value: str) -> str:
    if kind is AnswerKind.CODE:
        return value
    s = " ".join(value.split()).lower().strip(_EDGE_PUNCT)
    if kind is AnswerKind.LABEL:
        s = s.strip("()[]*$ ").strip(_EDGE_PUNCT).strip()
    elif kind is AnswerKind.INTEGER:
        s = s.strip("$ ").strip(_EDGE_PUNCT)
        if re.fullmatch(r"[-+]?\d+", s):
            s = str(int(s))
    return s


def _answer_lines(raw: str) -> list[tuple[int, str]]:
    found = []
    for i, line in enumerate(raw.splitlines()):
        m = _ANSWER_LINE.match(line)
        if m and m.group(1).strip():
            found.append((i, m.group(1).strip()))
    return found


def extract_answer(raw: str, hint: str | AnswerKind) -> ExtractedAnswer:
    """Pull the committed answer out of a model response.

    QA kinds read the last ``Answer: <value>`` line; code reads the body of the last
    fenced block. Raises :class:`NoAnswerLine` / :class:`NoFencedBlock` when absent.
    """
    if not raw:
        raise ValueError("raw response is empty")
    kind = hint if isinstance(hint, AnswerKind) else answer_kind_for_hint(hint)
    if kind is AnswerKind.CODE:
        blocks = _FENCE.findall(raw)
        if not blocks:
            raise NoFencedBlock("no fenced code block in response")
        return ExtractedAnswer(kind, blocks[-1], blocks[-1])
    lines = _answer_lines(raw)
    if not lines:
        raise NoAnswerLine("no 'Answer:' line in response")
    span = lines[-1][1]
    return ExtractedAnswer(kind, _normalize(kind, span), span)


def try_extract(raw: str, hint: str | AnswerKind) -> Optional[ExtractedAnswer]:
    try:
        return extract_answer(raw, hint)
    except (ExtractionError, ValueError):
        return None


def strip_answer_line(raw: str) -> str:
    """Reasoning trace of a QA response: everything except the final Answer line."""
    lines = _answer_lines(raw)
    if not lines:
        return raw.rstrip()
    idx = lines[-1][0]
    kept = raw.splitlines()
    del kept[idx]
    return "\n".join(kept).rstrip()


def normalize_answer(a: ExtractedAnswer, b: ExtractedAnswer) -> bool:
    """Answer equivalence on normalized forms."""
    if a.kind is not b.kind:
        raise KindMismatch(f"{a.kind.value} vs {b.kind.value}")
    return a.normalized == b.normalized


answers_equivalent = normalize_answer


def gold_matches(answer: Optional[ExtractedAnswer], gold: Optional[str]) -> Optional[bool]:
    if gold is None:
        return None
    if answer is None:
        return False
    return answer.normalized == _normalize(answer.kind, gold)


@dataclass(frozen=True)
class Sample:
    perturbation_index: int
    sample_index: int
    raw_text: str
    trace: str
    extracted: Optional[ExtractedAnswer]
    tokens_in: int = 0
    tokens_out: int = 0
    public_results: tuple = ()  # code only: tuple of TestResult dicts
    score: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "perturbation_index": self.perturbation_index,
            "sample_index": self.sample_index,
            "raw_text": self.raw_text,
            "trace": self.trace,
            "extracted": None if self.extracted is None else self.extracted.to_dict(),
            "tokens_in": self.tokens_in,
            "tokens_out": self.tokens_out,
            "public_results": [dict(r) for r in self.public_results],
            "score": self.score,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Sample":
        return cls(
            d["perturbation_index"],
            d["sample_index"],
            d["raw_text"],
            d["trace"],
            ExtractedAnswer.from_dict(d["extracted"]),
            d["tokens_in"],
            d["tokens_out"],
            tuple(d.get("public_results", ())),
            d.get("score"),
        )


class RefinementAnnotation(str, enum.Enum):
    UNCHANGED_MAJORITY = "unchanged_majority"
    ADOPTED = "adopted"
    IMPROVED = "improved"
    DEFENDED = "defended"
    NONE = "none"


@dataclass(frozen=True)
class Proposal:
    perturbation_index: int
    best_sample: Sample
    answer: ExtractedAnswer
    quality: float
    intra_agreement: float
    refinement_annotation: RefinementAnnotation = RefinementAnnotation.NONE
    signature: Optional[tuple[str, ...]] = None  # code: names of passed public tests
    persona: Optional[str] = None

    def __post_init__(self):
        if not 0.0 <= self.quality <= 1.0:
            raise ValueError(f"quality {self.quality} outside [0,1]")
        if not 0.0 < self.intra_agreement <= 1.0:
            raise ValueError(f"intra_agreement {self.intra_agreement} outside (0,1]")

    @property
    def text(self) -> str:
        return self.best_sample.raw_text

    def to_dict(self) -> dict:
        return {
            "perturbation_index": self.perturbation_index,
            "best_sample": self.best_sample.to_dict(),
            "answer": self.answer.to_dict(),
            "quality": self.quality,
            "intra_agreement": self.intra_agreement,
            "refinement_annotation": self.refinement_annotation.value,
            "signature": None if self.signature is None else list(self.signature),
            "persona": self.persona,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Proposal":
        return cls(
            d["perturbation_index"],
            Sample.from_dict(d["best_sample"]),
            ExtractedAnswer.from_dict(d["answer"]),
            d["quality"],
            d["intra_agreement"],
            RefinementAnnotation(d["refinement_annotation"]),
            None if d.get("signature") is None else tuple(d["signature"]),
            d.get("persona"),
        )


@dataclass
class RunRecord:
    """Full per-problem ledger. Serialized one per line in RunRecord JSONL files.

    Sections are kept as plain JSON-compatible dicts/lists so the file stays
    readable without this package; ``proposals_pre``/``proposals_post`` hold
    ``Proposal.to_dict()`` payloads.
    """

    problem_id: str
    method: str
    config: dict
    perturbations: list = field(default_factory=list)
    samples: list = field(default_factory=list)
    proposals_pre: list = field(default_factory=list)
    proposals_post: list = field(default_factory=list)
    unscoreable: list = field(default_factory=list)
    consensus_record: Optional[dict] = None
    aggregate_output: Optional[dict] = None
    override_fired: bool = False
    gated: bool = False
    final_answer: Optional[dict] = None
    final_source: str = ""
    correct: Optional[bool] = None
    vote_answer: Optional[dict] = None
    vote_correct: Optional[bool] = None
    gated_answer: Optional[dict] = None
    gated_correct: Optional[bool] = None
    evaluation: dict = field(default_factory=dict)
    calls: dict = field(default_factory=dict)
    tokens: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {"schema": SCHEMA_VERSION, **d}

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        d = dict(d)
        schema = d.pop("schema", None)
        if schema != SCHEMA_VERSION:
            raise ValueError(f"unsupported RunRecord schema {schema!r}")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        return cls.from_dict(json.loads(line))

    @property
    def C_pre(self) -> Optional[float]:
        return None if self.consensus_record is None else self.consensus_record["C_pre"]

    @property
    def C_post(self) -> Optional[float]:
        return None if self.consensus_record is None else self.consensus_record["C_post"]


def write_records(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


def read_records(path) -> list[RunRecord]:
    with open(path, encoding="utf-8") as fh:
        return [RunRecord.from_json(line) for line in fh if line.strip()]
