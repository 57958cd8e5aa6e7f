"""Paired bootstrap and Welch's t."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as _st

from ..core import ScmoaError


class LengthMismatch(ScmoaError):
    pass


@dataclass(frozen=True)
class BootstrapCI:
    delta: float
    lo95: float
    hi95: float
    resamples: int


def bootstrap_diff_ci(a: Sequence[bool], b: Sequence[bool], resamples: int = 10_000, seed: int = 0) -> BootstrapCI:
    """Percentile CI of mean(a) - mean(b), resampling problems with replacement.

    Index matrix is ``default_rng(seed).integers(0, n, size=(resamples, n))``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"paired vectors differ in shape: {a.shape} vs {b.shape}")
    n = len(a)
    if n == 0:
        raise ValueError("need at least one paired observation")
    idx = np.random.default_rng(seed).integers(0, n, size=(resamples, n))
    diffs = a[idx].mean(axis=1) - b[idx].mean(axis=1)
    lo, hi = np.percentile(diffs, [2.5, 97.5])
    return BootstrapCI(float(a.mean() - b.mean()), float(lo), float(hi), resamples)


@dataclass(frozen=True)
class Welch:
    t: float
    df: float
    p: float


def welch(x: Sequence[float], y: Sequence[float]) -> Welch:
    """Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or len(y) < 2:
        raise ValueError("each group needs at least two observations")
    res = _st.ttest_ind(x, y, equal_var=False)
    vx, vy = x.var(ddof=1) / len(x), y.var(ddof=1) / len(y)
    denom = vx**2 / (len(x) - 1) + vy**2 / (len(y) - 1)
    df = (vx + vy) ** 2 / denom if denom > 0 else math.nan
    return Welch(float(res.statistic), float(df), float(res.pvalue))
