"""Mean pairwise error correlation across agents."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core import ScmoaError


class AllZeroVariance(ScmoaError):
    pass


@dataclass(frozen=True)
class ErrorCorrelation:
    rho_bar: float
    pairs: int
    skipped: int
    lo95: Optional[float] = None
    hi95: Optional[float] = None


def _pairwise(err: np.ndarray) -> tuple[list[float], int]:
    A = err.shape[1]
    sd = err.std(axis=0)
    vals, skipped = [], 0
    for i in range(A):
        for j in range(i + 1, A):
            if sd[i] == 0 or sd[j] == 0:
                skipped += 1
                continue
            vals.append(float(np.corrcoef(err[:, i], err[:, j])[0, 1]))
    return vals, skipped


def error_correlation_report(correct, resamples: int = 0, seed: int = 0) -> ErrorCorrelation:
    """Pearson correlation of error indicators per agent pair, averaged.

    ``resamples > 0`` adds a percentile CI from resampling problems.
    """
    err = ~np.asarray(correct, dtype=bool)
    if err.ndim != 2 or err.shape[1] < 2:
        raise ValueError("need a problems x agents matrix with at least two agents")
    vals, skipped = _pairwise(err.astype(float))
    if not vals:
        raise AllZeroVariance("every agent pair has a zero-variance column")
    rho = float(np.mean(vals))
    if resamples <= 0:
        return ErrorCorrelation(rho, len(vals), skipped)
    rng = np.random.default_rng(seed)
    n = err.shape[0]
    boots = []
    for _ in range(resamples):
        v, _ = _pairwise(err[rng.integers(0, n, size=n)].astype(float))
        if v:
            boots.append(np.mean(v))
    if not boots:
        return ErrorCorrelation(rho, len(vals), skipped)
    lo, hi = np.percentile(boots, [2.5, 97.5])
    return ErrorCorrelation(rho, len(vals), skipped, float(lo), float(hi))


def error_correlation(correct) -> float:
    return error_correlation_report(correct).rho_bar
