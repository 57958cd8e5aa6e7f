"""Kernel dispatch: the compiled extension when built, else the numpy fallback.

Set ``SCMOA_PURE_PYTHON=1`` to force the fallback. Both backends take the
same pre-drawn arrays, so their integer outputs are identical.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

if os.environ.get("SCMOA_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def _i64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def plurality(answers, K: int, impl=None):
    """Plurality answer per row (ties to earliest first occurrence) and its count."""
    a = _i64(answers)
    if a.ndim != 2 or a.shape[1] == 0:
        raise ValueError("answers must be a non-empty 2-D array")
    if a.size and (a.min() < 0 or a.max() >= K):
        raise ValueError("answers must lie in [0, K)")
    return (impl or _impl).plurality(a, int(K))


def refine_step(answers, winner, fresh, u, adopt: float, improve: float, anchored: bool, impl=None):
    return (impl or _impl).refine_step(
        _i64(answers), _i64(winner), _i64(fresh), np.ascontiguousarray(u, dtype=np.float64),
        float(adopt), float(improve), bool(anchored),
    )


def level_tally(kmax, correct, N: int, impl=None):
    return (impl or _impl).level_tally(_i64(kmax), np.ascontiguousarray(correct, dtype=np.uint8), int(N))


def transition_counts(kpre, kpost, N: int, impl=None):
    return (impl or _impl).transition_counts(_i64(kpre), _i64(kpost), int(N))
