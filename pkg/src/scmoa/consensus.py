"""Scoring, clustering and majority selection over proposals.

QA proposals cluster by normalized answer (a faithful partition: same cluster
means same answer). Code proposals cluster by test-pass signature, the set of
public test names a solution passes; that partition is *not* faithful, two
different programs can share a signature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .core import ExtractedAnswer, Proposal, ProblemKind, RunRecord, ScmoaError, TestCase
from .executor import Executor


class EmptyProposalSet(ScmoaError):
    pass


class NoScoreableProposals(ScmoaError):
    pass


class NoPublicPassers(ScmoaError):
    pass


@dataclass(frozen=True)
class Cluster:
    label: int
    members: tuple[int, ...]  # perturbation indices, ascending
    representative: ExtractedAnswer | tuple[str, ...]
    size: int
    mean_quality: float

    def to_dict(self) -> dict:
        rep = self.representative
        return {
            "label": self.label,
            "members": list(self.members),
            "representative": list(rep) if isinstance(rep, tuple) else rep.to_dict(),
            "size": self.size,
            "mean_quality": self.mean_quality,
        }


def cluster_key(p: Proposal, kind: ProblemKind):
    if kind is ProblemKind.CODE:
        if p.signature is None:
            raise ValueError(f"code proposal {p.perturbation_index} has no test signature")
        return ("sig", tuple(sorted(p.signature)))
    return ("ans", p.answer.kind.value, p.answer.normalized)


def qa_quality_scores(answers: Sequence[ExtractedAnswer | Proposal], N: Optional[int] = None) -> list[float]:
    """Agreement fraction of each answer among the ``N`` proposals."""
    if not answers:
        raise EmptyProposalSet("no proposals to score")
    answers = [a.answer if isinstance(a, Proposal) else a for a in answers]
    n = len(answers) if N is None else N
    keys = [(a.kind, a.normalized) for a in answers]
    return [sum(1 for k2 in keys if k2 == k) / n for k in keys]


def code_quality_score(solution: str, tests: Sequence[TestCase], executor: Executor) -> tuple[float, list]:
    """Public test pass rate and the per-test results it was computed from."""
    if not tests:
        raise ValueError("code scoring needs at least one public test")
    results = executor.run_tests(solution, tests)
    return sum(r.passed for r in results) / len(tests), results


def cluster_proposals(proposals: Sequence[Proposal], kind: ProblemKind) -> list[Cluster]:
    if not proposals:
        raise NoScoreableProposals("nothing to cluster")
    groups: dict = {}
    for p in sorted(proposals, key=lambda p: p.perturbation_index):
        groups.setdefault(cluster_key(p, kind), []).append(p)
    clusters = []
    for label, (key, members) in enumerate(groups.items()):
        rep = tuple(key[1]) if kind is ProblemKind.CODE else members[0].answer
        clusters.append(
            Cluster(
                label,
                tuple(m.perturbation_index for m in members),
                rep,
                len(members),
                sum(m.quality for m in members) / len(members),
            )
        )
    return clusters


def select_majority(clusters: Sequence[Cluster], N: int) -> tuple[Cluster, float]:
    """Largest cluster; ties by higher mean quality, then earliest first member."""
    if not clusters:
        raise NoScoreableProposals("no clusters")
    best = min(clusters, key=lambda c: (-c.size, -c.mean_quality, min(c.members)))
    return best, best.size / N


def cluster_of(clusters: Sequence[Cluster], perturbation_index: int) -> Cluster:
    for c in clusters:
        if perturbation_index in c.members:
            return c
    raise KeyError(perturbation_index)


def best_member(cluster: Cluster, proposals: Sequence[Proposal]) -> Proposal:
    """Highest-quality proposal of a cluster, lowest index on ties."""
    by_idx = {p.perturbation_index: p for p in proposals}
    members = [by_idx[i] for i in cluster.members]
    return min(members, key=lambda p: (-p.quality, p.perturbation_index))


@dataclass(frozen=True)
class FidelityGapReport:
    n_records: int
    pub_pass_count: int
    priv_pass_among_pub: int
    P_priv_given_pub: Optional[float]
    false_positive_rate: Optional[float]

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def fidelity_gap_report(records: Sequence[RunRecord], strict: bool = False) -> FidelityGapReport:
    """P(all private tests pass | all public tests pass) over code records.

    With no public passers the ratio is undefined: ``strict`` raises
    :class:`NoPublicPassers`, otherwise the ratio fields are ``None``.
    """
    pub = priv = 0
    n = 0
    for r in records:
        ev = r.evaluation.get("final") or {}
        if "public_pass_all" not in ev or "private_pass_all" not in ev:
            continue
        n += 1
        if ev["public_pass_all"]:
            pub += 1
            priv += bool(ev["private_pass_all"])
    if pub == 0:
        if strict:
            raise NoPublicPassers("no record passes all public tests")
        return FidelityGapReport(n, 0, 0, None, None)
    ratio = priv / pub
    return FidelityGapReport(n, pub, priv, ratio, 1.0 - ratio)

