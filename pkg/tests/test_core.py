import json

import pytest
from hypothesis import given, strategies as st

from scmoa.core import (
    AnswerKind,
    ExtractedAnswer,
    KindMismatch,
    NoAnswerLine,
    NoFencedBlock,
    Problem,
    ProblemKind,
    RunRecord,
    TestCase,
    Visibility,
    extract_answer,
    gold_matches,
    normalize_answer,
    strip_answer_line,
)


def test_extracts_last_answer_line_as_label():
    a = extract_answer("…so it is B.\nAnswer: B", "multiple choice A-D")
    assert (a.kind, a.normalized, a.raw_span) == (AnswerKind.LABEL, "b", "B")


def test_extracts_last_fenced_block_verbatim():
    raw = "first\n```python\nprint(0)\n```\nthen\n```python\nprint(1)\n```\n"
    a = extract_answer(raw, "code")
    assert a.kind is AnswerKind.CODE and a.normalized == "print(1)"


def test_missing_answer_line_raises():
    with pytest.raises(NoAnswerLine):
        extract_answer("the answer is probably B", "multiple choice")


def test_missing_fence_raises():
    with pytest.raises(NoFencedBlock):
        extract_answer("print(1)", "code")


def test_empty_raw_rejected():
    with pytest.raises(ValueError):
        extract_answer("", "integer")


@pytest.mark.parametrize(
    "raw,hint,expected",
    [
        ("Answer: A\nmore thought\nAnswer: C", "multiple choice", "c"),
        ("**Answer:** (D)", "multiple choice", "d"),
        ("answer: 042", "integer 0-999", "42"),
        ("Answer:   Not   Valid. ", "free text", "not valid"),
        ("Answer: 1200", "integer 0-999", "1200"),  # out of range still extracts
    ],
)
def test_extraction_variants(raw, hint, expected):
    assert extract_answer(raw, hint).normalized == expected


@pytest.mark.parametrize(
    "a,b,kind,eq",
    [("B", " b ", AnswerKind.LABEL, True), ("042", "42", AnswerKind.INTEGER, True), ("B", "C", AnswerKind.LABEL, False)],
)
def test_normalize_answer_examples(a, b, kind, eq):
    x = extract_answer(f"Answer: {a}", kind)
    y = extract_answer(f"Answer: {b}", kind)
    assert normalize_answer(x, y) is eq


def test_kind_mismatch():
    with pytest.raises(KindMismatch):
        normalize_answer(ExtractedAnswer(AnswerKind.LABEL, "a", "A"), ExtractedAnswer(AnswerKind.INTEGER, "1", "1"))


answer_text = st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cc", "Zl", "Zp")), min_size=1, max_size=20).filter(
    lambda s: s.strip(" \t.;,()[]*$") != "" and "\n" not in s and "\r" not in s
)


@given(answer_text, st.sampled_from([AnswerKind.LABEL, AnswerKind.INTEGER, AnswerKind.FREE_TEXT]))
def test_extraction_idempotent_on_raw_span(value, kind):
    try:
        first = extract_answer(f"reasoning\nAnswer: {value}", kind)
    except NoAnswerLine:
        return
    again = extract_answer(f"fresh text\nAnswer: {first.raw_span}", kind)
    assert again.normalized == first.normalized


@given(st.lists(st.sampled_from(["A", " a", "B", "b.", "(C)", "c"]), min_size=3, max_size=3))
def test_equivalence_relation(vals):
    x, y, z = (extract_answer(f"Answer: {v}", AnswerKind.LABEL) for v in vals)
    assert normalize_answer(x, x)
    assert normalize_answer(x, y) == normalize_answer(y, x)
    if normalize_answer(x, y) and normalize_answer(y, z):
        assert normalize_answer(x, z)


def test_trace_strips_only_final_answer_line():
    raw = "step one\nAnswer: A\nstep two\nAnswer: B"
    assert strip_answer_line(raw) == "step one\nAnswer: A\nstep two"


def test_gold_matching():
    a = extract_answer("Answer: (b)", "multiple choice")
    assert gold_matches(a, "B") is True
    assert gold_matches(None, "B") is False
    assert gold_matches(a, None) is None


def test_code_problem_needs_public_tests():
    with pytest.raises(ValueError):
        Problem("c", ProblemKind.CODE, "write code", "code")


def test_test_names_unique():
    t = TestCase("t", "", "")
    with pytest.raises(ValueError):
        Problem("c", ProblemKind.CODE, "x", "code", None, (t,), (TestCase("t", "1", "1", Visibility.PRIVATE),))


def test_problem_round_trip():
    p = Problem(
        "c1", ProblemKind.CODE, "double it", "code", None,
        (TestCase("a", "1\n", "2\n"),), (TestCase("b", "3\n", "6\n", Visibility.PRIVATE),),
    )
    d = json.loads(json.dumps(p.to_dict()))
    assert d["tests"]["public"][0]["name"] == "a"
    assert Problem.from_dict(d) == p


def test_run_record_round_trip_is_lossless():
    r = RunRecord("p1", "scmoa", {"N": 5, "theta": "inf"}, consensus_record={"C_pre": 0.6, "C_post": 0.8})
    r.failures.append("x")
    line = r.to_json()
    back = RunRecord.from_json(line)
    assert back == r and back.to_json() == line
    assert json.loads(line)["schema"] == 1
    assert back.C_pre == 0.6 and back.C_post == 0.8


def test_run_record_rejects_unknown_schema():
    d = RunRecord("p", "m", {}).to_dict()
    d["schema"] = 2
    with pytest.raises(ValueError):
        RunRecord.from_dict(d)
