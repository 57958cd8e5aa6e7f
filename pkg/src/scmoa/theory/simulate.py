"""Monte-Carlo simulators over a synthetic correlated-agent ensemble.

Answers are integers in ``[0, K)`` with 0 the correct one; wrong answers are
uniform over the ``K - 1`` alternatives. All random draws happen here in
numpy, block by block (see :mod:`scmoa.theory.rng`); the kernels only tally.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .rng import BLOCK, blocks


@dataclass(frozen=True)
class SyntheticEnsemble:
    N: int
    competences: tuple[float, ...]
    correlation_model: str = "independent"  # "independent" | "common_cause"
    rho: float = 0.0
    answer_space_size: int = 2
    seed: int = 0

    def __post_init__(self):
        comp = self.competences
        if isinstance(comp, (int, float)):
            comp = (float(comp),) * self.N
        comp = tuple(float(c) for c in comp)
        object.__setattr__(self, "competences", comp)
        if len(comp) != self.N:
            raise ValueError("need one competence per agent")
        if any(not 0.0 < c < 1.0 for c in comp):
            raise ValueError("competences must lie in (0,1)")
        if self.correlation_model not in ("independent", "common_cause"):
            raise ValueError(f"unknown correlation model {self.correlation_model!r}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0,1]")
        if self.answer_space_size < 2:
            raise ValueError("answer_space_size must be >= 2")

    @classmethod
    def homogeneous(cls, N: int, p: float, **kw) -> "SyntheticEnsemble":
        return cls(N, (p,) * N, **kw)

    @property
    def p_min(self) -> float:
        return min(self.competences)

    def draw(self, rng: np.random.Generator, n: int, competences: Optional[np.ndarray] = None) -> np.ndarray:
        """``n`` x ``N`` answer matrix. Every call consumes the same number of draws."""
        N, K = self.N, self.answer_space_size
        p = np.asarray(self.competences if competences is None else competences)
        correct = rng.random((n, N)) < p[None, :]
        wrong = rng.integers(1, K, size=(n, N))
        ans = np.where(correct, 0, wrong)
        copy = rng.random(n) < (self.rho if self.correlation_model == "common_cause" else 0.0)
        shared = np.where(rng.random(n) < self.p_min, 0, rng.integers(1, K, size=n))
        ans[copy] = shared[copy, None]
        return ans.astype(np.int64)


def _sd_binom(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n) if n > 0 else float("nan")


# -- vote ---------------------------------------------------------------------


@dataclass(frozen=True)
class LevelStat:
    n: int
    accuracy: Optional[float]
    sigma: Optional[float]


@dataclass(frozen=True)
class VoteResult:
    trials: int
    majority_acc: float
    sigma: float
    rho_bar: Optional[float]
    by_level: dict  # c -> LevelStat for C == c
    at_least: dict  # c -> LevelStat for C >= c

    @property
    def empirical_fidelity_by_C(self) -> dict:
        return {c: s.accuracy for c, s in self.by_level.items()}


def _level(n: int, hits: int) -> LevelStat:
    if n == 0:
        return LevelStat(0, None, None)
    acc = hits / n
    return LevelStat(n, acc, _sd_binom(acc, n))


def simulate_vote(ensemble: SyntheticEnsemble, trials: int, block: int = BLOCK) -> VoteResult:
    N, K = ensemble.N, ensemble.answer_space_size
    total = np.zeros(N + 1, dtype=np.int64)
    hits = np.zeros(N + 1, dtype=np.int64)
    s1 = np.zeros(N, dtype=np.int64)
    s2 = np.zeros((N, N), dtype=np.int64)
    for _, n, rng in blocks(ensemble.seed, trials, block):
        ans = ensemble.draw(rng, n)
        winner, kmax = kernels.plurality(ans, K)
        t, h = kernels.level_tally(kmax, winner == 0, N)
        total += t
        hits += h
        err = (ans != 0).astype(np.int64)
        s1 += err.sum(axis=0)
        s2 += err.T @ err
    correct = int(hits.sum())
    acc = correct / trials
    by_level = {j / N: _level(int(total[j]), int(hits[j])) for j in range(1, N + 1)}
    at_least = {j / N: _level(int(total[j:].sum()), int(hits[j:].sum())) for j in range(1, N + 1)}
    return VoteResult(trials, acc, _sd_binom(acc, trials), _rho_from_moments(s1, s2, trials), by_level, at_least)


def _rho_from_moments(s1: np.ndarray, s2: np.ndarray, n: int) -> Optional[float]:
    mean = s1 / n
    cov = s2 / n - np.outer(mean, mean)
    var = np.diag(cov)
    vals = []
    N = len(s1)
    for i in range(N):
        for j in range(i + 1, N):
            if var[i] > 0 and var[j] > 0:
                vals.append(cov[i, j] / math.sqrt(var[i] * var[j]))
    return float(np.mean(vals)) if vals else None


def exact_majority_accuracy(N: int, p: float) -> float:
    """Binary-answer majority accuracy of N independent agents, N odd."""
    if N % 2 == 0:
        raise ValueError("N must be odd for a tie-free binary majority")
    return sum(math.comb(N, j) * p**j * (1 - p) ** (N - j) for j in range(N // 2 + 1, N + 1))


# -- refinement ---------------------------------------------------------------


@dataclass(frozen=True)
class RefinementOperator:
    adopt_prob: float
    improve_prob: float
    anchored: bool = True
    uplift: float = 0.15

    def __post_init__(self):
        if self.adopt_prob < 0 or self.improve_prob < 0 or self.adopt_prob + self.improve_prob > 1 + 1e-12:
            raise ValueError("adopt_prob + improve_prob must lie in [0,1]")

    @property
    def defend_prob(self) -> float:
        return 1.0 - self.adopt_prob - self.improve_prob


@dataclass(frozen=True)
class RefinementResult:
    trials: int
    acc_pre: float
    acc_post: float
    sigma_diff: float
    transition_matrix: np.ndarray  # [k_max pre, k_max post] counts
    strict_trials: int
    strict_changed: int

    @property
    def below_diagonal(self) -> int:
        return int(np.tril(self.transition_matrix, -1).sum())


def simulate_refinement(ensemble: SyntheticEnsemble, op: RefinementOperator, trials: int, block: int = BLOCK) -> RefinementResult:
    """One refinement round after a plurality vote.

    Anchored: agents already on the plurality answer are frozen, the rest adopt
    it, redraw at uplifted competence, or keep their answer. Unanchored applies
    the same operator to every agent.
    """
    N, K = ensemble.N, ensemble.answer_space_size
    uplifted = np.minimum(np.asarray(ensemble.competences) + op.uplift, 0.99)
    trans = np.zeros((N + 1, N + 1), dtype=np.int64)
    pre = post = 0
    d2 = 0
    strict = changed = 0
    for _, n, rng in blocks(ensemble.seed, trials, block):
        ans = ensemble.draw(rng, n)
        fresh_correct = rng.random((n, N)) < uplifted[None, :]
        fresh = np.where(fresh_correct, 0, rng.integers(1, K, size=(n, N)))
        u = rng.random((n, N))
        w0, k0 = kernels.plurality(ans, K)
        new = kernels.refine_step(ans, w0, fresh, u, op.adopt_prob, op.improve_prob, op.anchored)
        w1, k1 = kernels.plurality(new, K)
        trans += kernels.transition_counts(k0, k1, N)
        c0 = (w0 == 0).astype(np.int64)
        c1 = (w1 == 0).astype(np.int64)
        pre += int(c0.sum())
        post += int(c1.sum())
        d2 += int(((c1 - c0) ** 2).sum())
        s = k0 >= N // 2 + 1
        strict += int(s.sum())
        changed += int((w1[s] != w0[s]).sum())
    acc_pre, acc_post = pre / trials, post / trials
    mean_d = acc_post - acc_pre
    var_d = max(d2 / trials - mean_d**2, 0.0)
    return RefinementResult(trials, acc_pre, acc_post, math.sqrt(var_d / trials), trans, strict, changed)


# -- stratified vs flat -------------------------------------------------------


@dataclass(frozen=True)
class Mode:
    select_prob: float
    competence: float


def _modes(modes) -> list[Mode]:
    out = [m if isinstance(m, Mode) else Mode(**m) if isinstance(m, dict) else Mode(*m) for m in modes]
    if abs(sum(m.select_prob for m in out) - 1.0) > 1e-9:
        raise ValueError("select_probs must sum to 1")
    return out


@dataclass(frozen=True)
class HierarchyResult:
    trials: int
    acc_stratified: float
    acc_flat: float
    sigma_acc_stratified: float
    sigma_acc_flat: float
    var_stratified: float
    var_flat: float
    sigma_var_stratified: float
    sigma_var_flat: float


def _stratified_competences(modes: Sequence[Mode], N: int) -> np.ndarray:
    # one mode per perturbation, round-robin
    return np.array([modes[i % len(modes)].competence for i in range(N)])


def hierarchical_vs_flat(
    modes, N: int, k: int, trials: int, K: int = 2, seed: int = 0, block: int = BLOCK, flat_draws: Optional[int] = None
) -> HierarchyResult:
    """Stratified (one mode per perturbation, inner vote over k) against flat mixture draws.

    The flat arm makes ``flat_draws`` draws, ``N*k`` by default.
    """
    ms = _modes(modes)
    strat_c = _stratified_competences(ms, N)
    probs = np.array([m.select_prob for m in ms])
    comps = np.array([m.competence for m in ms])
    M = N * k
    F = M if flat_draws is None else int(flat_draws)
    if F < 1:
        raise ValueError("flat_draws must be >= 1")
    acc_s = acc_f = 0
    sum_s = sum_f = sq_s = sq_f = 0
    for _, n, rng in blocks(seed, trials, block):
        cs = rng.random((n, N, k)) < strat_c[None, :, None]
        ans_s = np.where(cs, 0, rng.integers(1, K, size=(n, N, k)))
        inner, _ = kernels.plurality(ans_s.reshape(n * N, k), K)
        w_s, _ = kernels.plurality(inner.reshape(n, N), K)
        mode_idx = np.searchsorted(np.cumsum(probs), rng.random((n, F)), side="right").clip(0, len(ms) - 1)
        cf = rng.random((n, F)) < comps[mode_idx]
        ans_f = np.where(cf, 0, rng.integers(1, K, size=(n, F)))
        w_f, _ = kernels.plurality(ans_f, K)
        acc_s += int((w_s == 0).sum())
        acc_f += int((w_f == 0).sum())
        ns = cs.reshape(n, M).sum(axis=1).astype(np.int64)
        nf = cf.sum(axis=1).astype(np.int64)
        sum_s += int(ns.sum())
        sq_s += int((ns**2).sum())
        sum_f += int(nf.sum())
        sq_f += int((nf**2).sum())

    def var(s, sq, m_draws):
        # variance of the correct-draw frequency, population form
        m = s / trials
        return (sq / trials - m * m) / (m_draws * m_draws)

    vs, vf = var(sum_s, sq_s, M), var(sum_f, sq_f, F)
    a_s, a_f = acc_s / trials, acc_f / trials
    sv = math.sqrt(2.0 / max(trials - 1, 1))
    return HierarchyResult(trials, a_s, a_f, _sd_binom(a_s, trials), _sd_binom(a_f, trials), vs, vf, vs * sv, vf * sv)


@dataclass(frozen=True)
class HierarchyOracle:
    acc_stratified: float
    acc_flat: float
    var_stratified: float
    var_flat: float


def _binary_plurality_correct(bits: Sequence[int]) -> bool:
    """K=2 plurality with earliest-first tie-break, on correctness bits."""
    ones = sum(bits)
    zeros = len(bits) - ones
    if ones != zeros:
        return ones > zeros
    return bool(bits[0])


def enumerate_hierarchical(modes, N: int, k: int, flat_draws: Optional[int] = None) -> HierarchyOracle:
    """Exact binary-answer (K=2) values by enumerating every correctness outcome."""
    ms = _modes(modes)
    M = N * k
    F = M if flat_draws is None else int(flat_draws)
    if max(M, F) > 20:
        raise ValueError("enumeration limited to 20 draws per arm")
    strat_c = _stratified_competences(ms, N)
    pbar = sum(m.select_prob * m.competence for m in ms)
    acc_s = 0.0
    for bits in itertools.product((0, 1), repeat=M):
        ps = 1.0
        for j, b in enumerate(bits):
            c = strat_c[j // k]
            ps *= c if b else 1 - c
        inner = [int(_binary_plurality_correct(bits[i * k:(i + 1) * k])) for i in range(N)]
        if _binary_plurality_correct(inner):
            acc_s += ps
    acc_f = 0.0
    for bits in itertools.product((0, 1), repeat=F):
        if _binary_plurality_correct(bits):
            ones = sum(bits)
            acc_f += pbar**ones * (1 - pbar) ** (F - ones)
    var_s = sum(float(c) * (1 - float(c)) for c in strat_c) * k / M**2
    var_f = pbar * (1 - pbar) / F
    return HierarchyOracle(float(acc_s), float(acc_f), float(var_s), float(var_f))
