import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scmoa.theory import (
    BACKEND,
    Mode,
    RefinementOperator,
    SyntheticEnsemble,
    enumerate_hierarchical,
    exact_majority_accuracy,
    extraction_bound,
    fidelity_bound,
    gate_loss_bound,
    hierarchical_vs_flat,
    jury_bound,
    simulate_refinement,
    simulate_vote,
)
from scmoa.theory import _kernels_py, kernels
from scmoa.theory.rng import BLOCK, block_seed, block_sizes, shard_blocks, splitmix64
from scmoa.theory.suite import TWO_MODE, SuiteConfig, format_table, run_suites

try:
    from scmoa.theory import _kernels as _kernels_c
except ImportError:  # pragma: no cover - exercised only without a compiler
    _kernels_c = None

needs_c = pytest.mark.skipif(_kernels_c is None, reason="compiled kernels not built")


# -- closed forms --------------------------------------------------------------


@pytest.mark.parametrize("N", [1, 3, 5, 9, 25, 101])
@pytest.mark.parametrize("eps", [0.01, 0.1, 0.15, 0.4])
def test_jury_reduction(N, eps):
    assert jury_bound(N, eps, 0.0) == pytest.approx(1 - math.exp(-2 * N * eps**2), abs=1e-12)


def test_jury_examples_and_monotonicity():
    assert jury_bound(5, 0.15, 0.0) == pytest.approx(1 - math.exp(-0.225), abs=1e-12)
    assert jury_bound(5, 0.15, 0.0) == pytest.approx(0.2015, abs=5e-5)
    assert jury_bound(10_001, 0.15, 1.0) == pytest.approx(1 - math.exp(-2 * 0.15**2), abs=1e-6)
    assert all(jury_bound(5, 0.15, r) > jury_bound(5, 0.15, r + 0.1) for r in np.arange(0, 0.9, 0.1))
    assert all(jury_bound(n, 0.15, 0.3) < jury_bound(n + 1, 0.15, 0.3) for n in range(1, 30))
    with pytest.raises(ValueError):
        jury_bound(5, 0.0, 0.1)


@pytest.mark.parametrize(
    "N,p,c,expected", [(5, 0.8, 1.0, 1 - 0.25**5), (5, 0.8, 0.6, 0.84375), (5, 0.999999, 0.6, 1.0)]
)
def test_fidelity_bound_examples(N, p, c, expected):
    assert fidelity_bound(N, p, c) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("p", [0.4, 0.5, 1.0])
def test_fidelity_bound_rejects_p_min(p):
    with pytest.raises(ValueError):
        fidelity_bound(5, p, 0.6)


def test_gate_loss_and_extraction():
    assert gate_loss_bound(1.0, 0.7, 0.9) == 0
    assert gate_loss_bound(0.739, 0.696, 1.0) == pytest.approx(0.182, abs=5e-4)
    assert gate_loss_bound(0.5, 0.0, 1.0) == 0
    blind = extraction_bound(0.0, 0.5, 0.7, 0.3, 0.9)
    assert blind.lower_bound_advantage == pytest.approx(-0.07) and not blind.nondeg_condition
    perfect = extraction_bound(0.5, 0.4, 0.7, 0.3, 1.0)
    assert perfect.lower_bound_advantage == pytest.approx(0.06) and perfect.nondeg_condition


def test_exact_majority():
    assert exact_majority_accuracy(5, 0.8) == pytest.approx(0.94208, abs=1e-12)


# -- rng -----------------------------------------------------------------------


def test_splitmix_reference_values():
    # first output of the reference generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert block_seed(1, 0) != block_seed(1, 1)
    assert block_sizes(20_000) == [BLOCK, BLOCK, 20_000 - 2 * BLOCK]


def test_shard_count_independence():
    ens = SyntheticEnsemble.homogeneous(5, 0.7, answer_space_size=3, seed=9)
    trials = 3 * BLOCK + 100
    whole = simulate_vote(ens, trials)
    sizes = block_sizes(trials)
    for shards in (1, 2, 4):
        hits = 0
        for shard in shard_blocks(len(sizes), shards):
            for b in shard:
                ans = ens.draw(np.random.default_rng(block_seed(ens.seed, b)), sizes[b])
                w, _ = kernels.plurality(ans, 3)
                hits += int((w == 0).sum())
        assert hits == round(whole.majority_acc * trials)


def test_simulators_bit_reproducible():
    ens = SyntheticEnsemble.homogeneous(5, 0.7, correlation_model="common_cause", rho=0.2, answer_space_size=4, seed=3)
    assert simulate_vote(ens, 20_000) == simulate_vote(ens, 20_000)
    a = simulate_refinement(ens, RefinementOperator(0.3, 0.3), 20_000)
    b = simulate_refinement(ens, RefinementOperator(0.3, 0.3), 20_000)
    assert np.array_equal(a.transition_matrix, b.transition_matrix) and a.acc_post == b.acc_post


# -- kernels -------------------------------------------------------------------


def test_plurality_tie_goes_to_earliest():
    w, c = kernels.plurality([[2, 1, 1, 2, 0], [0, 0, 1, 1, 3], [3, 3, 3, 3, 3]], 4)
    assert w.tolist() == [2, 0, 3] and c.tolist() == [2, 2, 5]
    with pytest.raises(ValueError):
        kernels.plurality([[0, 4]], 4)


@needs_c
@settings(max_examples=50, deadline=None)
@given(st.integers(1, 9), st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_backend_parity(N, K, seed):
    rng = np.random.default_rng(seed)
    n = 257
    ans = rng.integers(0, K, size=(n, N))
    wp, kp = kernels.plurality(ans, K, impl=_kernels_py)
    wc, kc = kernels.plurality(ans, K, impl=_kernels_c)
    assert np.array_equal(wp, wc) and np.array_equal(kp, kc)
    fresh = rng.integers(0, K, size=(n, N))
    u = rng.random((n, N))
    for anchored in (True, False):
        rp = kernels.refine_step(ans, wp, fresh, u, 0.3, 0.4, anchored, impl=_kernels_py)
        rc = kernels.refine_step(ans, wp, fresh, u, 0.3, 0.4, anchored, impl=_kernels_c)
        assert np.array_equal(rp, rc)
    tp = kernels.level_tally(kp, wp == 0, N, impl=_kernels_py)
    tc = kernels.level_tally(kp, wp == 0, N, impl=_kernels_c)
    assert all(np.array_equal(x, y) for x, y in zip(tp, tc))
    k2 = rng.integers(1, N + 1, size=n)
    assert np.array_equal(
        kernels.transition_counts(kp, k2, N, impl=_kernels_py), kernels.transition_counts(kp, k2, N, impl=_kernels_c)
    )


def test_pure_python_switch():
    code = "from scmoa.theory import kernels; print(kernels.BACKEND)"
    env = {**os.environ, "SCMOA_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert BACKEND in ("cython", "python")


@needs_c
def test_suite_identical_across_backends():
    code = (
        "from scmoa.theory.suite import SuiteConfig, run_suites;"
        "rows = run_suites(SuiteConfig(trials=20000, refine_trials=2000, refine_params=5), ['vote', 'anchoring', 'stratified']);"
        "print([(r.case, r.empirical) for r in rows])"
    )
    outs = set()
    for flag in ("0", "1"):
        env = {**os.environ, "SCMOA_PURE_PYTHON": flag}
        outs.add(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout)
    assert len(outs) == 1


# -- simulators ------------------------------------------------------------------


def test_vote_matches_binomial():
    r = simulate_vote(SyntheticEnsemble.homogeneous(5, 0.8, seed=1), 100_000)
    assert abs(r.majority_acc - 0.94208) <= 3 * r.sigma


def test_full_copy_accuracy_is_p():
    ens = SyntheticEnsemble.homogeneous(5, 0.8, correlation_model="common_cause", rho=1.0, seed=2)
    r = simulate_vote(ens, 50_000)
    assert abs(r.majority_acc - 0.8) <= 3 * r.sigma
    assert r.by_level[1.0].n == 50_000


def test_common_cause_rho_bar():
    ens = SyntheticEnsemble.homogeneous(6, 0.7, correlation_model="common_cause", rho=0.3, seed=4)
    assert simulate_vote(ens, 100_000).rho_bar == pytest.approx(0.3, abs=0.02)


@pytest.mark.parametrize("N", [3, 5, 7])
@pytest.mark.parametrize("p", [0.6, 0.8])
def test_fidelity_never_violated(N, p):
    r = simulate_vote(SyntheticEnsemble.homogeneous(N, p, answer_space_size=4, seed=N * 10 + int(p * 10)), 100_000)
    for c in (0.6, 0.8, 1.0):
        m = math.ceil(N * c - 1e-12)
        lv = r.at_least[m / N]
        assert lv.accuracy >= fidelity_bound(N, p, c) - 3 * lv.sigma


def test_anchored_refinement_never_degrades_consensus():
    ens = SyntheticEnsemble(5, (0.6, 0.7, 0.55, 0.8, 0.65), "common_cause", 0.1, 3, seed=5)
    r = simulate_refinement(ens, RefinementOperator(0.4, 0.4), 10_000)
    assert r.below_diagonal == 0 and r.strict_changed == 0 and r.strict_trials > 0
    assert r.acc_post >= r.acc_pre - 3 * r.sigma_diff


def test_unanchored_can_degrade():
    ens = SyntheticEnsemble.homogeneous(5, 0.7, answer_space_size=3, seed=6)
    r = simulate_refinement(ens, RefinementOperator(0.0, 1.0, anchored=False, uplift=0.0), 20_000)
    assert r.below_diagonal > 0
    assert abs(r.acc_post - r.acc_pre) <= 3 * r.sigma_diff


def test_refinement_operator_validation():
    with pytest.raises(ValueError):
        RefinementOperator(0.7, 0.5)
    assert RefinementOperator(0.2, 0.3).defend_prob == pytest.approx(0.5)


def test_two_mode_oracle_and_mc():
    oracle = enumerate_hierarchical(TWO_MODE, 5, 1, flat_draws=10)
    assert oracle.acc_stratified == pytest.approx(0.875276875, abs=1e-12)
    assert oracle.acc_flat == pytest.approx(0.712190978972338, abs=1e-12)
    assert oracle.acc_stratified > oracle.acc_flat
    mc = hierarchical_vs_flat(TWO_MODE, 5, 1, 100_000, seed=17, flat_draws=10)
    assert abs(mc.acc_stratified - oracle.acc_stratified) <= 3 * mc.sigma_acc_stratified
    assert abs(mc.acc_flat - oracle.acc_flat) <= 3 * mc.sigma_acc_flat


def test_oracle_against_binomial():
    # a single mode with flat draws is a plain majority vote
    o = enumerate_hierarchical([Mode(1.0, 0.8)], 5, 1)
    assert o.acc_flat == pytest.approx(exact_majority_accuracy(5, 0.8), abs=1e-12)
    assert o.acc_stratified == pytest.approx(o.acc_flat, abs=1e-12)
    with pytest.raises(ValueError):
        enumerate_hierarchical([Mode(0.5, 0.8)], 5, 1)
    with pytest.raises(ValueError):
        enumerate_hierarchical(TWO_MODE, 7, 3)


def test_ensemble_validation():
    with pytest.raises(ValueError):
        SyntheticEnsemble(3, (0.5, 1.0, 0.7))
    with pytest.raises(ValueError):
        SyntheticEnsemble.homogeneous(3, 0.7, correlation_model="copula")


def test_suite_small_config_passes():
    rows = run_suites(SuiteConfig(trials=20_000, refine_trials=2_000, refine_params=10))
    assert all(r.passed for r in rows), format_table([r for r in rows if not r.passed])
    assert any(r.note.startswith("FLAG") for r in rows)


def test_suite_rejects_out_of_range_p_min():
    with pytest.raises(ValueError):
        run_suites(SuiteConfig(p_mins=(0.4,), trials=1000), ["fidelity"])
