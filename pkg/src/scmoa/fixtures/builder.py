"""Rule-based scripted models that generate the bundled fixture files.

The responder reads a request the way a model would (problem marker, the
paraphrase number, the variant tag, the XML blocks) and answers from the
script tables below. Running the pipeline against it while recording every
request yields ``toy_qa_fixtures.json``; ``python -m scmoa.fixtures.builder``
regenerates all three files.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from pathlib import Path
from typing import Optional

from .. import prompts
from ..agents import AgentClient, CacheStore, ChatRequest, ScriptedBackend
from ..benchmark import write_benchmark
from ..core import Problem, ProblemKind, TestCase, Visibility
from ..pipeline import Pipeline, PipelineConfig
from . import TOY_QA, TOY_QA_FIXTURES, TOY_QA_MANIFEST
from . import path as fixture_path

HINT = "multiple choice A-D"

# (stem, options, gold)
_QA_ITEMS = [
    ("A 2 kg cart moves at 3 m/s. What is its momentum in kg m/s?", ("6", "5", "1.5", "9"), "A"),
    ("A photon carries 4.7 eV. Which process can it drive in a 300 K gas?", ("none", "vibrational excitation only",
     "electronic excitation", "nuclear fission"), "C"),
    ("A 12 nm film is illuminated at 500 nm. Which effect dominates the colour?", ("absorption", "thin-film interference",
     "scattering only", "fluorescence"), "B"),
    ("How many moles are in 18 g of water?", ("1", "2", "0.5", "18"), "A"),
    ("A 50 Hz signal has what period in ms?", ("50", "20", "5", "2"), "B"),
    ("Heating 1 kg of water by 10 °C takes roughly how many kJ?", ("4.2", "420", "4200", "42"), "D"),
    ("A 3-4-5 right triangle has which area?", ("12", "7.5", "6", "10"), "C"),
    ("Which integer n in 1..20 makes n^2 + n + 41 composite first?", ("10", "20", "40", "none"), "D"),
    ("A 0.5 mol ideal gas at 300 K and 1 atm fills about how many litres?", ("12.3", "22.4", "6.1", "24.6"), "A"),
    ("Sorting 8 keys with a comparison sort needs at least how many comparisons?", ("8", "24", "16", "15"), "B"),
]

# per problem: best-sample answers of the 5 perturbations, and second samples where they differ
_PROPOSE = {
    1: ["A", "A", "A", "A", "B"],
    2: ["C", "C", "C", "B", "D"],
    3: ["B", "B", "B", "C", "B"],
    4: ["A", "A", "A", "A", "A"],
    5: ["B", "B", "C", "B", "B"],
    6: ["D", "D", "A", "D", "C"],
    7: ["A", "A", "A", "C", "C"],
    8: ["B", "B", "B", "D", "A"],
    9: ["C", "C", "C", "A", "A"],
    10: ["D", "D", "A", "A", "B"],
}
_SECOND = {(2, 1): "B", (3, 4): "A", (6, 5): "B", (8, 5): "C", (10, 3): "C"}
_UNSCOREABLE = {(5, 2)}  # second sample of this perturbation omits the Answer line
_DECISIVE = {(7, "C"), (8, "D")}  # minority traces carrying a check the aggregator can verify
_IMPROVE = {(2, "D"): "B", (10, "B"): "C"}  # refined answer moves to another non-majority option
_DEFEND = {(6, "A")}
_REFINE_NO_ANSWER = {(6, "C")}
_DROP_NUMBER = {3: 1}  # problem -> paraphrase index whose first draft loses a number

_WORDS = ["balance", "estimate", "units", "limit", "symmetry", "bound", "ratio", "check", "scale", "invariant"]


def toy_qa_problems() -> list[Problem]:
    out = []
    for n, (stem, opts, gold) in enumerate(_QA_ITEMS, start=1):
        letters = "ABCD"
        text = f"[toy-{n:02d}] {stem} " + " ".join(f"({letters[i]}) {o}" for i, o in enumerate(opts))
        out.append(Problem(f"toy-{n:02d}", ProblemKind.QA, text, HINT, gold))
    return out


# -- request readers ------------------------------------------------------------

_MARK = re.compile(r"\[toy-(\d\d)\]")
_TAG = re.compile(r"<!-- sample variant: [^>]*-(\d+) -->")
_REPHRASE = re.compile(r"^Rephrasing (\d+):", re.M)
_REGEN = re.compile(r"<!-- regeneration: item (\w+) attempt (\d+) -->")


def _problem_number(text: str) -> int:
    m = _MARK.search(text)
    if not m:
        raise ValueError("request carries no toy problem marker")
    return int(m.group(1))


def _block(text: str, tag: str) -> str:
    m = re.search(rf"<{tag}[^>]*>\n(.*?)\n</{tag}>", text, re.S)
    return m.group(1) if m else ""


def _answer_of(text: str) -> Optional[str]:
    found = re.findall(r"^Answer:\s*(\S+)", text, re.M)
    return found[-1] if found else None


def _trace(n: int, pert: int, sample: int, answer: str) -> str:
    w1, w2 = _WORDS[(n + pert) % len(_WORDS)], _WORDS[(n * 3 + pert + sample) % len(_WORDS)]
    lines = [
        f"Restating the item in my own words, then an order-of-magnitude {w1} on option {answer}.",
        f"A second pass through the {w2} argument keeps {answer} ahead of the alternatives.",
    ]
    if (n, answer) in _DECISIVE:
        lines.append(f"Decisive check: substituting option {answer} back into the stated quantities closes exactly.")
    return "\n".join(lines)


# -- role handlers ----------------------------------------------------------------


def _paraphrase(req: ChatRequest, N: int) -> str:
    n = _problem_number(req.user_prompt)
    base = _MARK.sub("", req.user_prompt.split("\n\n<!--")[0]).strip()
    original = f"[toy-{n:02d}] {base}"
    regen = _REGEN.search(req.user_prompt)

    def variant(i: int) -> str:
        return f"Rephrasing {i}: {original}"

    if regen and regen.group(1) != "all":
        return json.dumps([variant(int(regen.group(1)))])
    items = [variant(i) for i in range(1, N + 1)]
    bad = _DROP_NUMBER.get(n)
    if bad is not None:
        # spell out the first number so validation rejects this one item
        items[bad - 1] = re.sub(r"\d+", "twelve", items[bad - 1].split("] ", 1)[1], count=1)
        items[bad - 1] = f"Rephrasing {bad}: [toy-{n:02d}] " + items[bad - 1].split(": ", 1)[-1]
    return "Here are the rephrasings:\n" + json.dumps(items, ensure_ascii=False)


def _propose(req: ChatRequest) -> str:
    n = _problem_number(req.user_prompt)
    m = _REPHRASE.search(req.user_prompt)
    pert = int(m.group(1)) if m else 1
    t = _TAG.search(req.user_prompt)
    sample = int(t.group(1)) if t else 0
    answer = _PROPOSE[n][pert - 1]
    if sample == 1:
        if (n, pert) in _UNSCOREABLE:
            return _trace(n, pert, sample, answer) + "\nI cannot settle this without more information."
        answer = _SECOND.get((n, pert), answer)
    return f"{_trace(n, pert, sample, answer)}\nAnswer: {answer}"


def _refine(req: ChatRequest) -> str:
    n = _problem_number(req.user_prompt)
    mine = _answer_of(_block(req.user_prompt, "YOUR_PROPOSAL"))
    majority = _answer_of(_block(req.user_prompt, "MAJORITY_APPROACH"))
    if (n, mine) in _REFINE_NO_ANSWER:
        return "On reflection both readings seem defensible; I will not commit."
    if (n, mine) in _DECISIVE or (n, mine) in _DEFEND:
        body = _block(req.user_prompt, "YOUR_PROPOSAL").rsplit("\nAnswer:", 1)[0]
        return f"I DEFEND my answer; the majority does not address my check.\n{body}\nAnswer: {mine}"
    if (n, mine) in _IMPROVE:
        new = _IMPROVE[(n, mine)]
        return f"I IMPROVE my reasoning: the {_WORDS[n % 10]} step was off, which points to {new}.\nAnswer: {new}"
    return f"I ADOPT the majority approach; its argument is stronger than mine.\nAnswer: {majority}"


def _aggregate(req: ChatRequest) -> str:
    text = req.user_prompt
    props = _block(text, "PROPOSALS")
    chunks = re.split(r"^Proposal \d+", props, flags=re.M)[1:]
    answers = [a for a in (_answer_of(c) for c in chunks) if a]
    for c in chunks:
        if "Decisive check" in c and _answer_of(c):
            a = _answer_of(c)
            return f"One proposal carries a verifiable substitution check; adopting it.\nAnswer: {a}"
    if not answers:
        answers = re.findall(r"answer (\w)\b", _block(text, "CONSENSUS_EVOLUTION")) or ["A"]
    a = Counter(answers).most_common(1)[0][0]
    return f"Synthesising the proposals, the weight of reasoning favours {a}.\nAnswer: {a}"


def qa_responder(N: int = 5):
    spuq_head = prompts.catalog()["spuq"]["system"].split("{")[0]

    def respond(req: ChatRequest) -> str:
        u = req.user_prompt
        if req.system_prompt.startswith(spuq_head):
            return _paraphrase(req, N)
        if "<YOUR_PROPOSAL" in u:
            return _refine(req)
        if "<PROPOSALS>" in u:
            return _aggregate(req)
        if "<PROBLEM>" in u:
            # question-only aggregation ablation
            return f"Working from the question alone.\nAnswer: {_PROPOSE[_problem_number(u)][0]}"
        return _propose(req)

    return respond


# -- expected outcomes ------------------------------------------------------------


def expected_outcomes() -> dict:
    """Per-problem expectations derived from the script tables, not from a run."""
    out = {}
    for n, (_, _, gold) in enumerate(_QA_ITEMS, start=1):
        answers = _PROPOSE[n]
        counts = Counter(answers)
        top = max(counts.values())
        vote = next(a for a in answers if counts[a] == top)  # earliest first occurrence among ties
        decisive = [a for a in answers if (n, a) in _DECISIVE]
        out[f"toy-{n:02d}"] = {
            "gold": gold,
            "vote": vote,
            "scmoa": decisive[0] if decisive else vote,
            "C_pre": top / len(answers),
        }
    return out


def record_fixtures(problems, config: PipelineConfig) -> dict:
    """Run scmoa and majority vote against the responder and keep every response by cache key."""
    backend = ScriptedBackend({}, strict=False, responder=qa_responder(config.N))
    client = AgentClient(backend, CacheStore())
    pipe = Pipeline(client, config)
    for p in problems:
        pipe.run_scmoa(p)
        pipe.run_majority_vote(p)
    return {key: entry["response"]["text"] for key, entry in sorted(client.cache._mem.items())}


def build(out_dir: Optional[Path] = None) -> dict:
    out_dir = Path(out_dir) if out_dir else fixture_path(TOY_QA).parent
    problems = toy_qa_problems()
    write_benchmark(out_dir / TOY_QA, problems)
    fixtures = record_fixtures(problems, PipelineConfig())
    (out_dir / TOY_QA_FIXTURES).write_text(json.dumps(fixtures, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    exp = expected_outcomes()
    vote_acc = sum(e["vote"] == e["gold"] for e in exp.values()) / len(exp)
    scmoa_acc = sum(e["scmoa"] == e["gold"] for e in exp.values()) / len(exp)
    manifest = {
        "benchmark": TOY_QA,
        "config": {"N": 5, "k": 2, "theta": "inf"},
        "problems": exp,
        "majority_vote_accuracy": vote_acc,
        "scmoa_accuracy": scmoa_acc,
        "margin": round(scmoa_acc - vote_acc, 10),
        "minority_recoverable": sorted(pid for pid, e in exp.items() if e["vote"] != e["gold"] == e["scmoa"]),
        "fixture_count": len(fixtures),
    }
    (out_dir / TOY_QA_MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


# -- code fixture -----------------------------------------------------------------

CODE_TEXT = "[code-01] Read an integer n from standard input and print 2*n."

_CODE_SOLUTIONS = {
    "double": "n = int(input())\nprint(2 * n)",
    "plus_two": "n = int(input())\nprint(n + 2)",
    "square": "n = int(input())\nprint(n * n)",
    "broken": "n = int(input())\nprint(n - 1 +",
    "shift_big": "n = int(input())\nprint(2 * n if n < 1000 else 2 * n + 1)",
}
# best sample per perturbation; perturbation 5 is public-perfect but fails the large private case
CODE_PLAN = ["double", "double", "plus_two", "square", "shift_big"]


def toy_code_problem() -> Problem:
    pub = (
        TestCase("t1", "2\n", "4\n", Visibility.PUBLIC),
        TestCase("t2", "0\n", "0\n", Visibility.PUBLIC),
        TestCase("t3", "5\n", "10\n", Visibility.PUBLIC),
    )
    priv = (
        TestCase("p1", "123456\n", "246912\n", Visibility.PRIVATE),
        TestCase("p2", "-7\n", "-14\n", Visibility.PRIVATE),
    )
    return Problem("code-01", ProblemKind.CODE, CODE_TEXT, "code", None, pub, priv)


def code_responder(aggregate: str = "broken"):
    c = prompts.catalog()

    def fence(src: str) -> str:
        return f"```python\n{src}\n```"

    def respond(req: ChatRequest) -> str:
        s, u = req.system_prompt, req.user_prompt
        if s.startswith(c["spuq"]["system"].split("{")[0]):
            n = 5
            return json.dumps([f"Rephrasing {i}: {CODE_TEXT}" for i in range(1, n + 1)])
        if "<YOUR_PROPOSAL" in u:
            return "I ADOPT the majority approach.\n" + fence(_CODE_SOLUTIONS["double"])
        if "<PROPOSALS>" in u:
            return "Merged solution.\n" + fence(_CODE_SOLUTIONS[aggregate])
        m = _REPHRASE.search(u)
        pert = int(m.group(1)) if m else 1
        t = _TAG.search(u)
        sample = int(t.group(1)) if t else 0
        name = CODE_PLAN[pert - 1]
        if sample == 1:
            name = "broken" if pert != 3 else "double"
        return f"Plan: read n, transform, print.\n{fence(_CODE_SOLUTIONS[name])}"

    return respond


if __name__ == "__main__":
    print(json.dumps(build(), indent=1, sort_keys=True))
