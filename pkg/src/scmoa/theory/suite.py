"""The verify-theory suites: every bound and proposition as a pass/fail row."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..stats.decomposition import Contingency, decompose
from .bounds import extraction_bound, fidelity_bound, gate_loss_bound, jury_bound
from .simulate import (
    RefinementOperator,
    SyntheticEnsemble,
    enumerate_hierarchical,
    exact_majority_accuracy,
    hierarchical_vs_flat,
    simulate_refinement,
    simulate_vote,
)

FIDELITY_N = (1, 3, 5, 7, 9)
FIDELITY_P = (0.6, 0.7, 0.8, 0.9)
FIDELITY_C = (0.6, 0.8, 1.0)
TWO_MODE = ((0.9, 0.55), (0.1, 0.95))
JURY_REFERENCE = 0.175  # quoted error figure that the displayed formula does not give


@dataclass(frozen=True)
class Row:
    suite: str
    case: str
    expected: Optional[float]
    empirical: Optional[float]
    sigma: Optional[float]
    passed: bool
    note: str = ""


@dataclass(frozen=True)
class SuiteConfig:
    seed: int = 20240601
    trials: int = 100_000
    refine_trials: int = 10_000
    refine_params: int = 50
    n_sigma: float = 3.0
    p_mins: Sequence[float] = FIDELITY_P
    answer_space: int = 4


def _within(emp: float, target: float, sigma: float, n_sigma: float) -> bool:
    return abs(emp - target) <= n_sigma * sigma + 1e-12


def suite_jury(cfg: SuiteConfig) -> list[Row]:
    rows = []
    worst = 0.0
    for N in (1, 3, 5, 7, 9, 15, 25, 101):
        for eps in (0.01, 0.05, 0.1, 0.15, 0.25, 0.4):
            worst = max(worst, abs(jury_bound(N, eps, 0.0) - (1 - math.exp(-2 * N * eps * eps))))
    rows.append(Row("jury", "rho=0 classical reduction, max abs diff", 0.0, worst, None, worst <= 1e-12))
    mono_rho = all(
        jury_bound(5, 0.15, r) >= jury_bound(5, 0.15, r + 0.05) for r in np.arange(0.0, 0.95, 0.05)
    )
    mono_n = all(jury_bound(n, 0.15, 0.3) <= jury_bound(n + 2, 0.15, 0.3) for n in range(1, 40, 2))
    rows.append(Row("jury", "monotone: weaker in rho, stronger in N", None, None, None, mono_rho and mono_n))
    val = jury_bound(5, 0.15, 0.6)
    rows.append(
        Row(
            "jury",
            "N=5 eps=0.15 rho=0.6 (flag)",
            JURY_REFERENCE,
            1 - val,
            None,
            True,
            f"FLAG: displayed formula gives error bound {1 - val:.3f} (success bound {val:.3f}); "
            f"quoted {JURY_REFERENCE} not reproduced",
        )
    )
    return rows


def suite_vote(cfg: SuiteConfig) -> list[Row]:
    rows = []
    r = simulate_vote(SyntheticEnsemble.homogeneous(5, 0.8, seed=cfg.seed), cfg.trials)
    exact = exact_majority_accuracy(5, 0.8)
    rows.append(Row("vote", "independent N=5 p=0.8 vs exact binomial", exact, r.majority_acc, r.sigma,
                    _within(r.majority_acc, exact, r.sigma, cfg.n_sigma)))
    r1 = simulate_vote(
        SyntheticEnsemble.homogeneous(5, 0.8, correlation_model="common_cause", rho=1.0, seed=cfg.seed + 1), cfg.trials
    )
    rows.append(Row("vote", "full copy rho=1: accuracy = p", 0.8, r1.majority_acc, r1.sigma,
                    _within(r1.majority_acc, 0.8, r1.sigma, cfg.n_sigma)))
    r2 = simulate_vote(
        SyntheticEnsemble.homogeneous(5, 0.7, correlation_model="common_cause", rho=0.4, seed=cfg.seed + 2), cfg.trials
    )
    # homogeneous common cause: cov = rho*q*(1-q), var = q*(1-q), so corr = rho
    rows.append(Row("vote", "common cause rho=0.4: empirical rho_bar", 0.4, r2.rho_bar, 0.01,
                    _within(r2.rho_bar, 0.4, 0.01, cfg.n_sigma)))
    return rows


def suite_fidelity(cfg: SuiteConfig) -> list[Row]:
    rows = []
    for i, N in enumerate(FIDELITY_N):
        for j, p in enumerate(cfg.p_mins):
            bounds = {c: fidelity_bound(N, p, c) for c in FIDELITY_C}  # validates p before simulating
            ens = SyntheticEnsemble.homogeneous(N, p, answer_space_size=cfg.answer_space, seed=cfg.seed + 100 * i + j)
            r = simulate_vote(ens, cfg.trials)
            for c in FIDELITY_C:
                m = math.ceil(N * c - 1e-12)
                st = r.at_least[m / N]
                if st.n == 0:
                    rows.append(Row("fidelity", f"N={N} p={p} c={c}", bounds[c], None, None, True, "no trials at this level"))
                    continue
                ok = st.accuracy >= bounds[c] - cfg.n_sigma * st.sigma - 1e-12
                rows.append(Row("fidelity", f"N={N} p={p} c={c}", bounds[c], st.accuracy, st.sigma, ok))
    return rows


def random_refinement_cases(n: int, seed: int) -> list[tuple[SyntheticEnsemble, RefinementOperator]]:
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        N = int(rng.choice([3, 4, 5, 6, 7, 9]))
        comps = tuple(float(x) for x in rng.uniform(0.55, 0.9, size=N))
        K = int(rng.integers(2, 5))
        rho = float(rng.uniform(0.0, 0.3))
        adopt = float(rng.uniform(0.0, 0.6))
        improve = float(rng.uniform(0.0, 1.0 - adopt))
        ens = SyntheticEnsemble(N, comps, "common_cause", rho, K, seed=seed + 1 + i)
        out.append((ens, RefinementOperator(adopt, improve, anchored=True)))
    return out


def suite_anchoring(cfg: SuiteConfig) -> list[Row]:
    rows = []
    below = 0
    worst = math.inf
    locked = True
    failed = []
    for idx, (ens, op) in enumerate(random_refinement_cases(cfg.refine_params, cfg.seed)):
        r = simulate_refinement(ens, op, cfg.refine_trials)
        below += r.below_diagonal
        slack = r.acc_post - r.acc_pre + cfg.n_sigma * r.sigma_diff
        worst = min(worst, slack)
        if slack < -1e-12:
            failed.append(idx)
        locked &= r.strict_changed == 0
    rows.append(Row("anchoring", f"below-diagonal transition mass over {cfg.refine_params} cases", 0.0, float(below), None, below == 0))
    rows.append(Row("anchoring", "acc_post >= acc_pre - 3 sigma (min slack)", 0.0, worst, None, not failed,
                    "" if not failed else f"failing cases {failed}"))
    rows.append(Row("anchoring", "strict-majority outputs locked", 0.0, 0.0 if locked else 1.0, None, locked))
    ctl = simulate_refinement(
        SyntheticEnsemble.homogeneous(5, 0.7, answer_space_size=3, seed=cfg.seed + 7),
        RefinementOperator(0.0, 1.0, anchored=False, uplift=0.0),
        cfg.trials,
    )
    rows.append(Row("anchoring", "unanchored symmetric redraw: no drift", 0.0, ctl.acc_post - ctl.acc_pre, ctl.sigma_diff,
                    _within(ctl.acc_post - ctl.acc_pre, 0.0, ctl.sigma_diff, cfg.n_sigma)))
    return rows


def suite_stratified(cfg: SuiteConfig) -> list[Row]:
    rows = []
    oracle = enumerate_hierarchical(TWO_MODE, 5, 1, flat_draws=10)
    rows.append(Row("stratified", "oracle: stratified N=5,k=1 > flat 10", oracle.acc_flat, oracle.acc_stratified, None,
                    oracle.acc_stratified > oracle.acc_flat))
    mc = hierarchical_vs_flat(TWO_MODE, 5, 1, cfg.trials, seed=cfg.seed + 11, flat_draws=10)
    rows.append(Row("stratified", "MC stratified accuracy vs oracle", oracle.acc_stratified, mc.acc_stratified,
                    mc.sigma_acc_stratified, _within(mc.acc_stratified, oracle.acc_stratified, mc.sigma_acc_stratified, cfg.n_sigma)))
    rows.append(Row("stratified", "MC flat accuracy vs oracle", oracle.acc_flat, mc.acc_flat, mc.sigma_acc_flat,
                    _within(mc.acc_flat, oracle.acc_flat, mc.sigma_acc_flat, cfg.n_sigma)))
    eq = hierarchical_vs_flat(((0.5, 0.6), (0.5, 0.9)), 4, 1, cfg.trials, seed=cfg.seed + 12)
    sig = math.hypot(eq.sigma_var_stratified, eq.sigma_var_flat)
    rows.append(Row("stratified", "equal allocation: var_strat <= var_flat + 3 sigma", eq.var_flat, eq.var_stratified,
                    sig, eq.var_stratified <= eq.var_flat + cfg.n_sigma * sig))
    one = enumerate_hierarchical(((1.0, 0.7),), 5, 1)
    rows.append(Row("stratified", "single mode: arms identical", one.acc_flat, one.acc_stratified, None,
                    abs(one.acc_flat - one.acc_stratified) < 1e-12))
    return rows


def suite_closed_form(cfg: SuiteConfig) -> list[Row]:
    rows = []
    g = gate_loss_bound(0.739, 0.696, 1.0)
    rows.append(Row("gate_loss", "(1-0.739)*0.696*1.0", 0.181656, g, None, abs(g - 0.181656) < 1e-9))
    d = decompose(Contingency(133, 5, 12, 48))
    e = extraction_bound(1.0, d.R_s, d.P_c, d.P_w, d.F_s)
    rows.append(Row("extraction", "q*p_sub = R_s reproduces the advantage", d.advantage, e.lower_bound_advantage, None,
                    abs(e.lower_bound_advantage - d.advantage) < 1e-12))
    rows.append(Row("extraction", "nondeg threshold matches decomposition", d.nondeg_threshold, e.threshold, None,
                    abs(e.threshold - d.nondeg_threshold) < 1e-12))
    return rows


SUITES: dict[str, Callable[[SuiteConfig], list[Row]]] = {
    "jury": suite_jury,
    "vote": suite_vote,
    "fidelity": suite_fidelity,
    "anchoring": suite_anchoring,
    "stratified": suite_stratified,
    "closed_form": suite_closed_form,
}


def run_suites(cfg: SuiteConfig = SuiteConfig(), names: Optional[Sequence[str]] = None) -> list[Row]:
    rows = []
    for name in names or SUITES:
        rows.extend(SUITES[name](cfg))
    return rows


def format_table(rows: Sequence[Row]) -> str:
    def f(x):
        return "" if x is None else f"{x:.6g}"

    head = ("suite", "case", "expected", "empirical", "sigma", "result", "note")
    body = [(r.suite, r.case, f(r.expected), f(r.empirical), f(r.sigma), "PASS" if r.passed else "FAIL", r.note) for r in rows]
    widths = [max(len(str(x)) for x in col) for col in zip(head, *body)]
    lines = ["  ".join(str(x).ljust(w) for x, w in zip(row, widths)).rstrip() for row in (head, *body)]
    return "\n".join(lines)
