import json

import pytest

from scmoa import prompts
from scmoa.agents import AgentClient, AgentSpec, ScriptedBackend
from scmoa.core import Problem, ProblemKind
from scmoa.perturb import (
    CONTROLLED_TYPES,
    GeneratorMalformedOutput,
    PerturbationMode,
    extract_protected_tokens,
    generate_perturbations,
    parse_json_list,
    validate_paraphrase,
)

GEN = AgentSpec("para")
SPUQ_HEAD = prompts.catalog()["spuq"]["system"].split("{")[0]


def qa(text, pid="q1"):
    return Problem(pid, ProblemKind.QA, text, "multiple choice A-D")


class Recorder:
    """Responder that records requests and replies from a script function."""

    def __init__(self, fn):
        self.fn = fn
        self.requests = []

    def __call__(self, req):
        self.requests.append(req)
        return self.fn(req)


def client_for(fn):
    rec = Recorder(fn)
    return AgentClient(ScriptedBackend({}, strict=False, responder=rec)), rec


def test_protected_tokens():
    t = extract_protected_tokens("A 2.5 kg mass moves at 3 m/s for 1e-3 s; 3-4 runs  at -7 K.\n```\nx = 1\n```")
    assert t.numbers[:4] == ("2.5", "3", "1e-3", "4") and "-7" in t.numbers and "1" in t.numbers
    assert t.units == ("m/s", "kg", "K") and t.code_blocks == ("x = 1",)
    assert validate_paraphrase(t, "nothing").passed is False
    assert "2.5" in validate_paraphrase(t, "nothing").missing


@pytest.mark.parametrize(
    "text,expected",
    [("[\"a\", \"b\"]", ["a", "b"]), ("Sure! Here: [\"x\"] done", ["x"]), ("[broken [\"ok\"]", ["ok"])],
)
def test_parse_json_list(text, expected):
    assert parse_json_list(text) == expected


def test_parse_json_list_malformed():
    with pytest.raises(GeneratorMalformedOutput):
        parse_json_list("no list here")


def test_spuq_happy_path():
    p = qa("What is 12 + 30 in total?")
    client, rec = client_for(lambda r: json.dumps([f"Variant {i}: what is 12 + 30 in total?" for i in range(5)]))
    out = generate_perturbations(p, 5, "spuq_freeform", GEN, client)
    assert [x.index for x in out] == [1, 2, 3, 4, 5]
    assert all(x.validated and x.regeneration_count == 0 and not x.fallback for x in out)
    assert len(rec.requests) == 1 and rec.requests[0].system_prompt.startswith(SPUQ_HEAD)
    assert "Produce 5 rephrasings" in rec.requests[0].system_prompt


def test_spuq_is_deterministic_through_cache():
    p = qa("What is 12 + 30 in total?")
    client, rec = client_for(lambda r: json.dumps(["12 + 30 = ?"] * 3))
    a = generate_perturbations(p, 3, "spuq_freeform", GEN, client)
    b = generate_perturbations(p, 3, "spuq_freeform", GEN, client)
    assert a == b and len(rec.requests) == 1


def test_spuq_regenerates_only_failing_item():
    p = qa("Compute 7 times 6.")

    def fn(r):
        if "regeneration: item 2" in r.user_prompt:
            return '["Multiply 7 by 6."]'
        return '["7 x 6 = ?", "Multiply seven by six.", "Find 7*6."]'

    client, rec = client_for(fn)
    out = generate_perturbations(p, 3, "spuq_freeform", GEN, client)
    assert [x.regeneration_count for x in out] == [0, 1, 0]
    assert out[1].text == "Multiply 7 by 6."
    assert rec.requests[1].user_prompt.endswith("<!-- regeneration: item 2 attempt 1 -->")


def test_spuq_falls_back_after_retry_cap():
    p = qa("Compute 7 times 6.")
    client, rec = client_for(lambda r: '["seven times six"]')
    out = generate_perturbations(p, 1, "spuq_freeform", GEN, client)
    assert out[0].fallback and out[0].text == p.text and out[0].regeneration_count == 3
    assert len(rec.requests) == 4


def test_spuq_malformed_batch_retried():
    p = qa("Compute 7 times 6.")
    replies = iter(["I can't format JSON", '["7 and 6 multiplied", "6 times 7"]'])
    client, rec = client_for(lambda r: next(replies))
    out = generate_perturbations(p, 2, "spuq_freeform", GEN, client)
    assert [x.text for x in out] == ["7 and 6 multiplied", "6 times 7"]
    assert "regeneration: item all attempt 1" in rec.requests[1].user_prompt


def test_controlled_mode_cycles_types():
    p = qa("Compute 7 times 6.")
    client, rec = client_for(lambda r: "Please compute 7 times 6.")
    out = generate_perturbations(p, 7, "controlled_taxonomy", GEN, client)
    assert [x.controlled_type for x in out] == list(CONTROLLED_TYPES) + list(CONTROLLED_TYPES[:2])
    # identical prompts for index 1 and 6 hit the cache
    assert len(rec.requests) == 5
    for ctype, req in zip(CONTROLLED_TYPES, rec.requests):
        assert prompts.catalog()["controlled"]["types"][ctype] in req.system_prompt


def test_persona_mode_keeps_text_and_assigns_personas():
    p = qa("Compute 7 times 6.")
    client, rec = client_for(lambda r: pytest.fail("persona mode must not call the generator"))
    out = generate_perturbations(p, 5, PerturbationMode.PERSONA, GEN, client)
    names = [n for n, _ in prompts.personas("qa")]
    assert [x.persona for x in out] == [names[i % len(names)] for i in range(5)]
    assert all(x.text == p.text for x in out) and not rec.requests


def test_invalid_n():
    with pytest.raises(ValueError):
        generate_perturbations(qa("x"), 0, "spuq_freeform", GEN, client_for(lambda r: "[]")[0])


SCIENCE = [
    "A photon has energy 2.5 eV. What is its wavelength in nm? (A) 496 (B) 248 (C) 992 (D) 124",
    "A 3 kg block slides at 4 m/s. What is its kinetic energy in J? (A) 24 (B) 12 (C) 48 (D) 6",
    "How many moles are in 18 g of water at 25 °C? (A) 1 (B) 2 (C) 0.5 (D) 18",
    "A gas at 300 K doubles its volume at fixed pressure. What is the new temperature in K? (A) 600 (B) 150 (C) 300 (D) 450",
    "A wave has frequency 50 Hz and speed 340 m/s. What is its wavelength? (A) 6.8 (B) 17000 (C) 0.15 (D) 3.4",
    "What is the pH of a 0.001 mol solution of a strong acid in 1 L? (A) 3 (B) 1 (C) 11 (D) 0.001",
]


def _science_paraphraser(req):
    text = req.user_prompt
    stem, options = text.split("? ", 1)
    n = int(req.system_prompt.split("Produce ")[1].split(" ")[0])
    styles = ["Consider this: {s}? Options: {o}", "{s}? Choose from {o}", "Question. {s}? {o}", "Given the setup, {s}? {o}", "Answer the following. {s}? {o}"]
    return json.dumps([styles[i % 5].format(s=stem, o=options) for i in range(n)])


def test_no_rejections_on_science_items():
    client, _ = client_for(_science_paraphraser)
    perts = []
    for i, text in enumerate(SCIENCE):
        perts += generate_perturbations(qa(text, f"s{i}"), 5, "spuq_freeform", GEN, client)
    assert len(perts) == 30
    regenerated = [p for p in perts if p.regeneration_count or p.fallback]
    assert regenerated == []
