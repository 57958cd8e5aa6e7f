"""Pure-Python (numpy) fallback for the compiled tally kernels."""

from __future__ import annotations

import numpy as np


def plurality(answers: np.ndarray, K: int) -> tuple[np.ndarray, np.ndarray]:
    T, N = answers.shape
    onehot = answers[:, :, None] == np.arange(K)[None, None, :]
    counts = onehot.sum(axis=1)
    # earliest first occurrence breaks count ties; absent answers sort last
    first = np.where(onehot.any(axis=1), onehot.argmax(axis=1), N)
    key = -counts * (N + 1) + first
    winner = key.argmin(axis=1).astype(np.int64)
    return winner, counts[np.arange(T), winner].astype(np.int64)


def refine_step(answers, winner, fresh, u, adopt, improve, anchored):
    w = winner[:, None]
    out = np.where(u < adopt, w, np.where(u < adopt + improve, fresh, answers))
    if anchored:
        out = np.where(answers == w, answers, out)
    return out.astype(np.int64)


def level_tally(kmax, correct, N):
    total = np.bincount(kmax, minlength=N + 1).astype(np.int64)
    hits = np.bincount(kmax, weights=correct.astype(np.float64), minlength=N + 1).astype(np.int64)
    return total, hits


def transition_counts(kpre, kpost, N):
    m = np.zeros((N + 1, N + 1), dtype=np.int64)
    np.add.at(m, (kpre, kpost), 1)
    return m
