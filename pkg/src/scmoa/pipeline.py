"""Perturb, propose, cluster, anchored refine, aggregate, override.

:class:`Pipeline` binds an :class:`~scmoa.agents.AgentClient`, an
:class:`~scmoa.executor.Executor` and a :class:`PipelineConfig`; each phase is
a method so tests can drive them one at a time.
"""

from __future__ import annotations

import dataclasses
import enum
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import prompts
from .agents import AgentClient, AgentSpec, ChatRequest, ChatResponse, make_variant_tag, with_variant_tag
from .consensus import (
    Cluster,
    NoScoreableProposals,
    best_member,
    cluster_key,
    cluster_of,
    cluster_proposals,
    qa_quality_scores,
    select_majority,
)
from .core import (
    AnswerKind,
    ExtractedAnswer,
    Problem,
    ProblemKind,
    Proposal,
    RefinementAnnotation,
    RunRecord,
    Sample,
    gold_matches,
    strip_answer_line,
    try_extract,
)
from .executor import Executor
from .perturb import DEFAULT_UNITS, Perturbation, PerturbationMode, generate_perturbations


class Ablation(str, enum.Enum):
    NONE = "none"
    ANSWER_ONLY = "answer_only"
    TRUNCATED_400 = "truncated_400"
    MAJORITY_ONLY = "majority_only"
    MINORITY_ONLY = "minority_only"
    PERMUTED = "permuted"
    RANDOM_3_OF_5 = "random_3_of_5"
    NO_METADATA = "no_metadata"
    NO_EVOLUTION = "no_evolution"
    Q_ONLY_AGG = "q_only_agg"
    Q_ONLY_COT = "q_only_cot"
    ANSWERS_BARE = "answers_bare"
    TRACES_BARE = "traces_bare"


DEFAULT_AGENT = AgentSpec("gpt-oss-120b")


@dataclass(frozen=True)
class PipelineConfig:
    N: int = 5
    k: int = 2
    theta: float = math.inf
    perturb_mode: PerturbationMode = PerturbationMode.SPUQ
    ablation: Ablation = Ablation.NONE
    proposer: AgentSpec = DEFAULT_AGENT
    aggregator: AgentSpec = DEFAULT_AGENT
    paraphraser: AgentSpec = DEFAULT_AGENT
    refiner: Optional[AgentSpec] = None
    seed: int = 0
    gate_on: str = "pre"  # "pre" | "post"
    method_prefix: str = "scmoa"
    problem_char_cap: int = 2500
    bare_char_cap: int = 1800
    truncate_chars: int = 400
    failure_snippet_chars: int = 500
    units: tuple[str, ...] = DEFAULT_UNITS
    workers: int = 1

    def __post_init__(self):
        if self.N < 1 or self.k < 1:
            raise ValueError("N and k must be >= 1")
        if self.gate_on not in ("pre", "post"):
            raise ValueError("gate_on must be 'pre' or 'post'")
        object.__setattr__(self, "perturb_mode", PerturbationMode(self.perturb_mode))
        object.__setattr__(self, "ablation", Ablation(self.ablation))

    @property
    def refiner_agent(self) -> AgentSpec:
        return self.refiner or self.proposer

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "k": self.k,
            "theta": "inf" if math.isinf(self.theta) else self.theta,
            "perturb_mode": self.perturb_mode.value,
            "ablation": self.ablation.value,
            "proposer": self.proposer.to_dict(),
            "aggregator": self.aggregator.to_dict(),
            "paraphraser": self.paraphraser.to_dict(),
            "refiner": self.refiner_agent.to_dict(),
            "seed": self.seed,
            "gate_on": self.gate_on,
            "prompt_catalog": prompts.version(),
        }


@dataclass(frozen=True)
class AggregationResult:
    raw_text: str
    answer: Optional[ExtractedAnswer]
    score: float
    differs_from_majority: bool
    signature: Optional[tuple[str, ...]] = None

    def to_dict(self) -> dict:
        return {
            "raw_text": self.raw_text,
            "answer": None if self.answer is None else self.answer.to_dict(),
            "score": self.score,
            "differs_from_majority": self.differs_from_majority,
            "signature": None if self.signature is None else list(self.signature),
        }


@dataclass
class Tally:
    calls: dict = field(default_factory=lambda: {"paraphrase": 0, "proposer": 0, "refiner": 0, "aggregator": 0})
    tokens_in: int = 0
    tokens_out: int = 0
    responses: list = field(default_factory=list)

    def add(self, role: str, resp: ChatResponse) -> None:
        self.calls[role] += 1
        self.tokens_in += resp.tokens_in
        self.tokens_out += resp.tokens_out
        self.responses.append((role, resp.tokens_in, resp.tokens_out))

    def calls_dict(self) -> dict:
        total = sum(self.calls.values())
        return {
            **self.calls,
            "total": total,
            "headline": self.calls["proposer"] + self.calls["aggregator"],
        }

    def tokens_dict(self) -> dict:
        return {"in": self.tokens_in, "out": self.tokens_out, "total": self.tokens_in + self.tokens_out}


class _RoleClient:
    """Routes one role's requests through the shared client while tallying them."""

    def __init__(self, client: AgentClient, tally: Tally, role: str):
        self.client, self.tally, self.role = client, tally, role

    def complete(self, req: ChatRequest) -> ChatResponse:
        resp = self.client.complete(req)
        self.tally.add(self.role, resp)
        return resp


def _ann() -> dict:
    return prompts.catalog()["aggregate_user"]["annotations"]


def _persona_name(persona: Optional[str]) -> str:
    return f"specialist using the {persona} strategy" if persona else "specialist"


def _answer_text(p: Proposal) -> str:
    if p.answer.kind is AnswerKind.CODE:
        sig = ", ".join(p.signature or ()) or "none"
        return f"passes public tests: {sig}"
    return p.answer.raw_span


def _split_tail(text: str, kind: AnswerKind) -> tuple[list[str], str]:
    """Prose lines and the committed tail (Answer line or final fenced block)."""
    if kind is AnswerKind.CODE:
        start = text.rfind("```", 0, max(text.rfind("```"), 0))
        if start < 0:
            return text.splitlines(), ""
        return text[:start].splitlines(), text[start:]
    lines = text.splitlines()
    trace = strip_answer_line(text)
    tail = [ln for ln in lines if ln not in trace.splitlines()]
    return trace.splitlines(), "\n".join(tail[-1:])


def apply_override(
    agg: AggregationResult,
    proposals: Sequence[Proposal],
    kind: ProblemKind,
) -> tuple[Proposal | AggregationResult, bool]:
    """Revert to the best proposal when the aggregate scores strictly lower.

    QA proposals and aggregates all score 1.0 once an answer is extracted, so
    this never fires on QA; code uses the public test pass rate.
    """
    if not proposals:
        return agg, False
    scores = [override_score(p, kind) for p in proposals]
    best = max(scores)
    if agg.score < best:
        winner = min(
            (p for p, s in zip(proposals, scores) if s == best), key=lambda p: p.perturbation_index
        )
        return winner, True
    return agg, False


def override_score(p: Proposal, kind: ProblemKind) -> float:
    return p.quality if kind is ProblemKind.CODE else 1.0


class Pipeline:
    def __init__(self, client: AgentClient, config: PipelineConfig = PipelineConfig(), executor: Optional[Executor] = None):
        self.client = client
        self.config = config
        self.executor = executor or Executor()

    # -- phase 0 ----------------------------------------------------------

    def perturb(self, problem: Problem, tally: Tally) -> list[Perturbation]:
        cfg = self.config
        return generate_perturbations(
            problem, cfg.N, cfg.perturb_mode, cfg.paraphraser, _RoleClient(self.client, tally, "paraphrase"), cfg.units
        )

    # -- phase 1 ----------------------------------------------------------

    def proposer_request(self, problem: Problem, pert: Perturbation, sample_index: int, k: int) -> ChatRequest:
        kind = problem.kind.value
        system = prompts.proposer_system(kind)
        if pert.persona_prompt:
            system = f"{pert.persona_prompt}\n\n{system}"
        user = pert.text
        if problem.kind is ProblemKind.QA and problem.answer_format_hint:
            user = f"{user}\n\n" + prompts.catalog()["answer_format_line"].format(hint=problem.answer_format_hint)
        if k > 1:
            tag = make_variant_tag(self.config.method_prefix, pert.persona or str(pert.index), sample_index)
            user = with_variant_tag(user, tag)
        return ChatRequest(system, user, self.config.proposer)

    def _make_sample(self, problem: Problem, pert_index: int, sample_index: int, resp: ChatResponse) -> Sample:
        akind = problem.answer_kind
        ext = try_extract(resp.text, akind)
        trace = resp.text.rstrip() if akind is AnswerKind.CODE else strip_answer_line(resp.text)
        sample = Sample(pert_index, sample_index, resp.text, trace, ext, resp.tokens_in, resp.tokens_out)
        if akind is AnswerKind.CODE and ext is not None:
            results = self.executor.run_tests(ext.normalized, problem.public_tests)
            score = sum(r.passed for r in results) / len(problem.public_tests)
            sample = dataclasses.replace(sample, public_results=tuple(r.to_dict() for r in results), score=score)
        return sample

    def _map(self, fn, items):
        if self.config.workers > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                return list(pool.map(fn, items))
        return [fn(it) for it in items]

    def phase1_propose(
        self, problem: Problem, perturbations: Sequence[Perturbation], tally: Optional[Tally] = None, k: Optional[int] = None
    ) -> tuple[list[Proposal], list[Sample], list[int]]:
        """Best-of-k per perturbation.

        Returns (proposals, all samples, indices of unscoreable perturbations).
        """
        k = self.config.k if k is None else k
        tally = tally if tally is not None else Tally()
        role = _RoleClient(self.client, tally, "proposer")
        jobs = [(p, j) for p in perturbations for j in range(k)]

        def draw(job):
            pert, j = job
            return self._make_sample(problem, pert.index, j, role.complete(self.proposer_request(problem, pert, j, k)))

        samples = self._map(draw, jobs)
        proposals, unscoreable = [], []
        for pert in perturbations:
            mine = [s for s in samples if s.perturbation_index == pert.index]
            prop = self._best_of_k(problem, pert, mine, k)
            if prop is None:
                unscoreable.append(pert.index)
            else:
                proposals.append(prop)
        if problem.kind is ProblemKind.QA and proposals:
            quals = qa_quality_scores([p.answer for p in proposals], self.config.N)
            proposals = [dataclasses.replace(p, quality=q) for p, q in zip(proposals, quals)]
        return proposals, samples, unscoreable

    def _best_of_k(self, problem: Problem, pert: Perturbation, samples: Sequence[Sample], k: int) -> Optional[Proposal]:
        scoreable = [s for s in samples if s.extracted is not None]
        if not scoreable:
            return None
        if problem.kind is ProblemKind.CODE:
            best = min(scoreable, key=lambda s: (-s.score, s.sample_index))
            sig = _signature(best)
            agree = sum(1 for s in scoreable if _signature(s) == sig)
            return Proposal(pert.index, best, best.extracted, best.score, agree / k, signature=sig, persona=pert.persona)
        counts: dict[str, int] = {}
        for s in scoreable:
            counts[s.extracted.normalized] = counts.get(s.extracted.normalized, 0) + 1
        best = min(scoreable, key=lambda s: (-counts[s.extracted.normalized], s.sample_index))
        alpha = counts[best.extracted.normalized] / k
        return Proposal(pert.index, best, best.extracted, alpha, alpha, persona=pert.persona)

    # -- phase 2 ----------------------------------------------------------

    def refine_request(self, problem: Problem, prop: Proposal, majority_rep: Proposal, k_max: int) -> ChatRequest:
        c = prompts.catalog()
        kind = problem.kind.value
        n = self.config.N
        system = c["refine_system"][kind].format(persona_name=_persona_name(prop.persona), k_max=k_max, n=n)
        u = c["refine_user"]
        blocks = [
            u["problem"].format(problem=problem.text[: self.config.problem_char_cap]),
            u["proposal"].format(quality=prop.quality, intra_agreement=prop.intra_agreement, text=prop.text),
        ]
        if problem.kind is ProblemKind.CODE:
            blocks.append(u["failure"].format(analysis=self._failure_analysis(prop, majority_rep)))
        blocks.append(u["majority"].format(quality=majority_rep.quality, k_max=k_max, n=n, text=majority_rep.text))
        blocks.append(u["final"][kind])
        return ChatRequest(system, "\n\n".join(blocks), self.config.refiner_agent)

    def _failure_analysis(self, prop: Proposal, majority_rep: Proposal) -> str:
        mine = {r["name"]: r for r in prop.best_sample.public_results}
        theirs = {r["name"]: r for r in majority_rep.best_sample.public_results}
        lines = []
        for name in sorted(set(mine) | set(theirs)):
            a = mine.get(name, {}).get("passed", False)
            b = theirs.get(name, {}).get("passed", False)
            if a != b:
                lines.append(f"test {name}: yours {'passes' if a else 'fails'}, majority {'passes' if b else 'fails'}")
        cap = self.config.failure_snippet_chars
        for name in sorted(mine):
            r = mine[name]
            if not r["passed"] and r.get("stderr"):
                lines.append(f"stderr ({name}): {r['stderr'][:cap]}")
        return "\n".join(lines) or "no differing public tests"

    def phase2_refine(
        self, problem: Problem, proposals: Sequence[Proposal], tally: Optional[Tally] = None
    ) -> tuple[list[Proposal], dict]:
        tally = tally if tally is not None else Tally()
        cfg = self.config
        kind = problem.kind
        clusters_pre = cluster_proposals(proposals, kind)
        majority, C_pre = select_majority(clusters_pre, cfg.N)
        p_star = best_member(majority, proposals)
        role = _RoleClient(self.client, tally, "refiner")
        minorities = [p for p in proposals if p.perturbation_index not in majority.members]

        def refine(p: Proposal) -> tuple[Proposal, str, bool]:
            resp = role.complete(self.refine_request(problem, p, p_star, majority.size))
            sample = self._make_sample(problem, p.perturbation_index, cfg.k, resp)
            if sample.extracted is None:
                return dataclasses.replace(p, refinement_annotation=RefinementAnnotation.DEFENDED), "defended", True
            if kind is ProblemKind.CODE:
                sig = _signature(sample)
                new = dataclasses.replace(p, best_sample=sample, answer=sample.extracted, quality=sample.score, signature=sig)
            else:
                new = dataclasses.replace(p, best_sample=sample, answer=sample.extracted)
            new_key = cluster_key(new, kind)
            if new_key == cluster_key(p_star, kind):
                action = RefinementAnnotation.ADOPTED
            elif new_key == cluster_key(p, kind):
                action = RefinementAnnotation.DEFENDED
            else:
                action = RefinementAnnotation.IMPROVED
            return dataclasses.replace(new, refinement_annotation=action), action.value, False

        refined = dict(zip((p.perturbation_index for p in minorities), self._map(refine, minorities)))
        post = []
        for p in proposals:
            if p.perturbation_index in refined:
                post.append(refined[p.perturbation_index][0])
            else:
                post.append(dataclasses.replace(p, refinement_annotation=RefinementAnnotation.UNCHANGED_MAJORITY))
        if kind is ProblemKind.QA and refined:
            # frozen proposals keep their phase-1 score; only revised ones are re-scored
            quals = qa_quality_scores([p.answer for p in post], cfg.N)
            post = [dataclasses.replace(p, quality=q) if p.perturbation_index in refined else p for p, q in zip(post, quals)]
        clusters_post = cluster_proposals(post, kind)
        majority_post, C_post = select_majority(clusters_post, cfg.N)
        record = {
            "clusters_pre": [c.to_dict() for c in clusters_pre],
            "clusters_post": [c.to_dict() for c in clusters_post],
            "C_pre": C_pre,
            "C_post": C_post,
            "k_max_pre": majority.size,
            "k_max_post": majority_post.size,
            "majority_label_pre": majority.label,
            "majority_label_post": majority_post.label,
            "majority_answer_pre": p_star.answer.to_dict(),
            "majority_members_pre": list(majority.members),
            "majority_representative_pre": p_star.perturbation_index,
            "actions": {str(i): v[1] for i, v in sorted(refined.items())},
            "refiner_extraction_failures": sorted(i for i, v in refined.items() if v[2]),
            "alphas": [p.intra_agreement for p in proposals],
        }
        return post, record

    # -- phase 3 ----------------------------------------------------------

    def aggregation_request(self, problem: Problem, post: Sequence[Proposal], record: dict) -> ChatRequest:
        cfg = self.config
        c = prompts.catalog()
        au = c["aggregate_user"]
        kind = problem.kind.value
        abl = cfg.ablation
        agg_system = c["aggregate_system"][kind].format(n=cfg.N, k=cfg.k)
        problem_block = au["problem"].format(problem=problem.text)
        if abl is Ablation.Q_ONLY_AGG:
            return ChatRequest(agg_system, problem_block, cfg.aggregator)
        if abl is Ablation.Q_ONLY_COT:
            user = problem.text
            if problem.kind is ProblemKind.QA and problem.answer_format_hint:
                user += "\n\n" + c["answer_format_line"].format(hint=problem.answer_format_hint)
            return ChatRequest(prompts.proposer_system(kind), user, cfg.aggregator)

        clusters_post = [_cluster_from_dict(d) for d in record["clusters_post"]]
        maj_label = record["majority_label_post"]
        ordered = sorted(post, key=lambda p: p.perturbation_index)
        shown = ordered
        note = None
        if abl is Ablation.MAJORITY_ONLY:
            shown = [p for p in ordered if cluster_of(clusters_post, p.perturbation_index).label == maj_label]
        elif abl is Ablation.MINORITY_ONLY:
            shown = [p for p in ordered if cluster_of(clusters_post, p.perturbation_index).label != maj_label]
            if not shown:
                note = au["unanimity_note"].format(n=cfg.N)
        elif abl is Ablation.RANDOM_3_OF_5:
            rng = random.Random(f"{cfg.seed}:{problem.id}:subset")
            keep = set(rng.sample([p.perturbation_index for p in ordered], min(3, len(ordered))))
            shown = [p for p in ordered if p.perturbation_index in keep]

        parts = [au["proposals_open"]]
        if abl is Ablation.ANSWERS_BARE:
            if problem.kind is ProblemKind.CODE:
                parts.extend(f"```python\n{p.answer.normalized}\n```" for p in shown)
            else:
                parts.append(", ".join(p.answer.raw_span for p in shown))
        elif note is not None:
            parts.append(note)
        else:
            for p in shown:
                parts.append(self._proposal_block(problem, p, clusters_post))
        parts.append(au["proposals_close"])
        blocks = [problem_block, "\n".join(parts)]
        if abl not in (Ablation.NO_EVOLUTION, Ablation.TRACES_BARE, Ablation.ANSWERS_BARE):
            blocks.append(self._evolution_block(post, record, problem.kind))
        return ChatRequest(agg_system, "\n\n".join(blocks), cfg.aggregator)

    def _proposal_block(self, problem: Problem, p: Proposal, clusters_post: Sequence[Cluster]) -> str:
        cfg = self.config
        au = prompts.catalog()["aggregate_user"]
        abl = cfg.ablation
        ann = _ann()[p.refinement_annotation.value]
        persona = p.persona or f"perturbation-{p.perturbation_index}"
        if abl is Ablation.TRACES_BARE:
            header = au["proposal_header_bare"].format(index=p.perturbation_index)
        elif abl is Ablation.NO_METADATA:
            header = au["proposal_header_no_meta"].format(index=p.perturbation_index, persona=persona, annotation=ann)
        else:
            header = au["proposal_header"].format(
                index=p.perturbation_index,
                persona=persona,
                cluster=cluster_of(clusters_post, p.perturbation_index).label,
                quality=p.quality,
                intra_agreement=p.intra_agreement,
                annotation=ann,
            )
        text = p.text
        if abl is Ablation.ANSWER_ONLY:
            text = f"Answer: {p.answer.raw_span}" if p.answer.kind is not AnswerKind.CODE else _answer_text(p)
        elif abl is Ablation.TRUNCATED_400:
            text = text[: cfg.truncate_chars]
        elif abl is Ablation.TRACES_BARE:
            text = text[: cfg.bare_char_cap]
        elif abl is Ablation.PERMUTED:
            prose, tail = _split_tail(text, p.answer.kind)
            prose = [ln for ln in prose if ln.strip()]
            random.Random(f"{cfg.seed}:{problem.id}:{p.perturbation_index}").shuffle(prose)
            text = "\n".join(prose + ([tail] if tail else []))
        return f"{header.rstrip()}\n{text}"

    def _evolution_block(self, post: Sequence[Proposal], record: dict, kind: ProblemKind) -> str:
        au = prompts.catalog()["aggregate_user"]
        n = self.config.N

        def describe(clusters: list) -> str:
            out = []
            for cd in clusters:
                rep = cd["representative"]
                what = f"answer {rep['raw_span']}" if isinstance(rep, dict) else "passes {" + ", ".join(rep) + "}"
                members = ",".join(str(m) for m in cd["members"])
                out.append(f"cluster {cd['label']}: {what}, {cd['size']}/{n} (proposals {members})")
            return "; ".join(out)

        lines = [
            au["evolution_open"],
            f"Pre-refinement agreement: {record['k_max_pre']}/{n}. {describe(record['clusters_pre'])}",
            f"Post-refinement agreement: {record['k_max_post']}/{n}. {describe(record['clusters_post'])}",
        ]
        by_idx = {p.perturbation_index: p for p in post}
        for idx, action in record["actions"].items():
            p = by_idx[int(idx)]
            who = p.persona or f"perturbation-{idx}"
            lines.append(f"Proposal {idx} ({who}) {action.upper()}; now {_answer_text(p)}.")
        if not record["actions"]:
            lines.append("No minority proposals; nobody switched or defended.")
        lines.append(au["evolution_close"])
        return "\n".join(lines)

    def phase3_aggregate(
        self, problem: Problem, post: Sequence[Proposal], record: dict, tally: Optional[Tally] = None
    ) -> AggregationResult:
        tally = tally if tally is not None else Tally()
        resp = _RoleClient(self.client, tally, "aggregator").complete(self.aggregation_request(problem, post, record))
        sample = self._make_sample(problem, 0, 0, resp)
        maj = next(p for p in post if p.perturbation_index in _members(record["clusters_post"], record["majority_label_post"]))
        if sample.extracted is None:
            return AggregationResult(resp.text, None, 0.0, True)
        if problem.kind is ProblemKind.CODE:
            sig = _signature(sample)
            differs = tuple(sorted(sig)) != tuple(sorted(maj.signature or ()))
            return AggregationResult(resp.text, sample.extracted, sample.score, differs, sig)
        differs = sample.extracted.normalized != maj.answer.normalized
        return AggregationResult(resp.text, sample.extracted, 1.0, differs)

    # -- drivers ----------------------------------------------------------

    def _gated_choice(self, post: Sequence[Proposal], record: dict, kind: ProblemKind) -> Proposal:
        by_idx = {p.perturbation_index: p for p in post}
        rep0 = by_idx[record["majority_representative_pre"]]
        maj_post_members = _members(record["clusters_post"], record["majority_label_post"])
        if rep0.perturbation_index in maj_post_members:
            return rep0
        cluster = _cluster_from_dict(next(c for c in record["clusters_post"] if c["label"] == record["majority_label_post"]))
        return best_member(cluster, post)

    def run_scmoa(self, problem: Problem) -> RunRecord:
        cfg = self.config
        gated_method = not math.isinf(cfg.theta)
        rec = RunRecord(problem.id, "scmoa_gated" if gated_method else "scmoa", cfg.to_dict())
        tally = Tally()
        perts = self.perturb(problem, tally)
        rec.perturbations = [p.to_dict() for p in perts]
        proposals, samples, unscoreable = self.phase1_propose(problem, perts, tally)
        rec.samples = [s.to_dict() for s in samples]
        rec.proposals_pre = [p.to_dict() for p in proposals]
        rec.unscoreable = unscoreable
        if not proposals:
            return self._no_answer(problem, rec, tally)
        post, record = self.phase2_refine(problem, proposals, tally)
        frozen = set(record["majority_members_pre"])
        # the majority label is known once clustered, so frozen entries read the same on both sides
        rec.proposals_pre = [(q if p.perturbation_index in frozen else p).to_dict() for p, q in zip(proposals, post)]
        rec.proposals_post = [p.to_dict() for p in post]
        rec.consensus_record = record
        by_idx = {p.perturbation_index: p for p in proposals}
        vote = by_idx[record["majority_representative_pre"]]
        gated_choice = self._gated_choice(post, record, problem.kind)
        rec.vote_answer = vote.to_dict()
        rec.gated_answer = gated_choice.to_dict()

        gate_value = record["C_pre"] if cfg.gate_on == "pre" else record["C_post"]
        if gated_method and gate_value >= cfg.theta:
            rec.gated = True
            final: Proposal | AggregationResult = gated_choice
            rec.final_source = "gated_majority"
        else:
            agg = self.phase3_aggregate(problem, post, record, tally)
            rec.aggregate_output = agg.to_dict()
            if agg.answer is None:
                rec.failures.append("aggregator_extraction_failed")
                final = gated_choice
                rec.final_source = "majority_fallback"
            else:
                final, fired = apply_override(agg, post, problem.kind)
                rec.override_fired = fired
                rec.final_source = "override_best_proposal" if fired else "aggregate"
        rec.final_answer = _final_dict(final)
        self._evaluate(problem, rec, final, vote, gated_choice, proposals)
        rec.calls = tally.calls_dict()
        rec.tokens = tally.tokens_dict()
        return rec

    def run_majority_vote(self, problem: Problem) -> RunRecord:
        cfg = self.config
        rec = RunRecord(problem.id, "majority_vote", cfg.to_dict())
        tally = Tally()
        perts = self.perturb(problem, tally)
        rec.perturbations = [p.to_dict() for p in perts]
        proposals, samples, unscoreable = self.phase1_propose(problem, perts, tally)
        rec.samples = [s.to_dict() for s in samples]
        rec.proposals_pre = [p.to_dict() for p in proposals]
        rec.unscoreable = unscoreable
        if not proposals:
            return self._no_answer(problem, rec, tally)
        clusters = cluster_proposals(proposals, problem.kind)
        majority, C = select_majority(clusters, cfg.N)
        vote = best_member(majority, proposals)
        rec.consensus_record = {
            "clusters_pre": [c.to_dict() for c in clusters],
            "C_pre": C,
            "C_post": C,
            "k_max_pre": majority.size,
            "k_max_post": majority.size,
            "majority_answer_pre": vote.answer.to_dict(),
            "majority_members_pre": list(majority.members),
            "majority_representative_pre": vote.perturbation_index,
            "actions": {},
            "alphas": [p.intra_agreement for p in proposals],
        }
        rec.vote_answer = rec.gated_answer = vote.to_dict()
        rec.final_answer = _final_dict(vote)
        rec.final_source = "majority_vote"
        self._evaluate(problem, rec, vote, vote, vote, proposals)
        rec.calls = tally.calls_dict()
        rec.tokens = tally.tokens_dict()
        return rec

    def _no_answer(self, problem: Problem, rec: RunRecord, tally: Tally) -> RunRecord:
        rec.failures.append("NoScoreableProposals")
        rec.final_source = "no_answer"
        gradable = problem.kind is ProblemKind.CODE or problem.gold is not None
        rec.correct = rec.vote_correct = rec.gated_correct = False if gradable else None
        rec.calls = tally.calls_dict()
        rec.tokens = tally.tokens_dict()
        return rec

    # -- evaluation (gold / private tests never reach a prompt) ------------

    def _evaluate_solution(self, problem: Problem, answer: Optional[ExtractedAnswer]) -> dict:
        if problem.kind is ProblemKind.QA:
            return {"correct": gold_matches(answer, problem.gold)}
        if answer is None:
            return {"correct": False, "public_pass_all": False, "private_pass_all": False}
        pub = self.executor.run_tests(answer.normalized, problem.public_tests)
        priv = self.executor.run_tests(answer.normalized, problem.private_tests) if problem.private_tests else []
        pub_all = all(r.passed for r in pub)
        priv_all = all(r.passed for r in priv) if priv else pub_all
        return {
            "correct": priv_all,
            "public_pass_all": pub_all,
            "private_pass_all": priv_all,
            "private_passed": [r.name for r in priv if r.passed],
        }

    def _evaluate(self, problem, rec, final, vote, gated_choice, proposals) -> None:
        final_answer = final.answer
        rec.evaluation["final"] = ev = self._evaluate_solution(problem, final_answer)
        rec.correct = ev["correct"]
        rec.evaluation["vote"] = vev = ev if vote is final else self._evaluate_solution(problem, vote.answer)
        rec.vote_correct = vev["correct"]
        if gated_choice is not None:
            if gated_choice is final:
                gev = ev
            elif gated_choice is vote or (
                getattr(gated_choice, "answer", None) == vote.answer and problem.kind is ProblemKind.QA
            ):
                gev = vev
            else:
                gev = self._evaluate_solution(problem, gated_choice.answer)
            rec.evaluation["gated"] = gev
            rec.gated_correct = gev["correct"]
        if problem.kind is ProblemKind.QA and problem.gold is not None:
            rec.evaluation["proposals"] = {
                str(p.perturbation_index): gold_matches(p.answer, problem.gold) for p in proposals
            }


def _signature(sample: Sample) -> tuple[str, ...]:
    return tuple(sorted(r["name"] for r in sample.public_results if r["passed"]))


def _members(clusters: list, label: int) -> tuple[int, ...]:
    for c in clusters:
        if c["label"] == label:
            return tuple(c["members"])
    raise KeyError(label)


def _cluster_from_dict(d: dict) -> Cluster:
    rep = d["representative"]
    rep = ExtractedAnswer.from_dict(rep) if isinstance(rep, dict) else tuple(rep)
    return Cluster(d["label"], tuple(d["members"]), rep, d["size"], d["mean_quality"])


def _final_dict(final: Proposal | AggregationResult) -> dict:
    if isinstance(final, Proposal):
        return {"source": "proposal", "perturbation_index": final.perturbation_index, "answer": final.answer.to_dict()}
    return {"source": "aggregate", "perturbation_index": None, "answer": final.answer.to_dict()}


def gate_simulation(records: Sequence[RunRecord], thetas: Sequence[float]) -> dict:
    """Accuracy if a gate at each threshold had been applied to ungated records.

    A record uses its gated (majority) result when pre-refinement consensus
    reaches the threshold, and its always-aggregate result otherwise.
    """
    out = {}
    for theta in thetas:
        vals = []
        for r in records:
            if r.consensus_record is None:
                vals.append(bool(r.correct))
                continue
            use_gate = not math.isinf(theta) and r.C_pre >= theta
            vals.append(bool(r.gated_correct if use_gate else r.correct))
        out[theta] = sum(vals) / len(vals) if vals else float("nan")
    return out
