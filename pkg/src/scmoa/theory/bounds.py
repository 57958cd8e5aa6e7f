"""Closed-form bounds: correlated jury, consensus fidelity, gate loss, extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass


def _unit(name: str, x: float) -> None:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name}={x} outside [0,1]")


def jury_bound(N: int, epsilon: float, rho_bar: float) -> float:
    """1 - exp(-2 N eps^2 / (1 + (N-1) rho)): majority-correct lower bound."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    _unit("rho_bar", rho_bar)
    if N < 1:
        raise ValueError("N must be >= 1")
    return 1.0 - math.exp(-2.0 * N * epsilon**2 / (1.0 + (N - 1) * rho_bar))


def fidelity_bound(N: int, p_min: float, c: float) -> float:
    """Lower bound on P(majority correct | consensus >= c) for independent agents."""
    if not 0.5 < p_min < 1.0:
        raise ValueError(f"p_min={p_min} must lie in (0.5, 1)")
    if not 0.0 < c <= 1.0:
        raise ValueError(f"c={c} must lie in (0, 1]")
    # ceil with a guard so 0.6*5 == 3 does not round up to 4
    m = math.ceil(N * c - 1e-12)
    val = 1.0 - math.comb(N, m) * ((1.0 - p_min) / p_min) ** m
    return min(1.0, max(0.0, val))


def gate_loss_bound(F_theta: float, P_C_ge_theta: float, P_agg_corrects: float) -> float:
    for name, v in (("F_theta", F_theta), ("P_C_ge_theta", P_C_ge_theta), ("P_agg_corrects", P_agg_corrects)):
        _unit(name, v)
    return (1.0 - F_theta) * P_C_ge_theta * P_agg_corrects


@dataclass(frozen=True)
class ExtractionBound:
    lower_bound_advantage: float
    nondeg_condition: bool
    threshold: float


def extraction_bound(q: float, p_sub: float, P_c: float, P_w: float, F_s: float) -> ExtractionBound:
    for name, v in (("q", q), ("p_sub", p_sub), ("P_c", P_c), ("P_w", P_w), ("F_s", F_s)):
        _unit(name, v)
    gain = P_w * q * p_sub
    lb = gain - P_c * (1.0 - F_s)
    denom = P_c + gain
    thr = P_c / denom if denom > 0 else 1.0
    return ExtractionBound(lb, F_s >= thr, thr)
