"""Inter-rater agreement and label-aggregation baselines."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..core import ScmoaError


class SingleCategory(ScmoaError):
    """Only one category was ever used, so chance agreement is 1 and kappa is 0/0."""


def fleiss_kappa(ratings: Sequence[Sequence]) -> float:
    """Fleiss' kappa for an items x raters matrix of category labels."""
    rows = [list(r) for r in ratings]
    if not rows:
        raise ValueError("no items")
    n = len(rows[0])
    if n < 2 or any(len(r) != n for r in rows):
        raise ValueError("every item needs the same number (>= 2) of raters")
    cats = sorted({x for r in rows for x in r}, key=repr)
    if len(cats) < 2:
        raise SingleCategory("all ratings fall in one category")
    col = {c: j for j, c in enumerate(cats)}
    counts = np.zeros((len(rows), len(cats)))
    for i, r in enumerate(rows):
        for x in r:
            counts[i, col[x]] += 1
    P_i = ((counts**2).sum(axis=1) - n) / (n * (n - 1))
    p_j = counts.sum(axis=0) / (len(rows) * n)
    P_bar, P_e = P_i.mean(), (p_j**2).sum()
    return float((P_bar - P_e) / (1 - P_e))


@dataclass(frozen=True)
class DawidSkeneResult:
    labels: list
    posteriors: np.ndarray  # problems x classes
    classes: list
    confusions: np.ndarray  # agents x true class x observed class
    priors: np.ndarray
    converged: bool
    iterations: int


def dawid_skene(votes: Sequence[Sequence], iters: int = 100, tol: float = 1e-6, smoothing: float = 1e-6) -> DawidSkeneResult:
    """Multinomial Dawid-Skene EM, initialised from per-problem vote fractions.

    If ``iters`` runs out first the current estimate comes back with
    ``converged=False``.
    """
    V = [list(r) for r in votes]
    if not V:
        raise ValueError("need at least one problem")
    A = len(V[0])
    if A < 1 or any(len(r) != A for r in V):
        raise ValueError("every problem needs the same number of agent votes")
    classes = sorted({x for r in V for x in r}, key=repr)
    L = len(classes)
    idx = {c: j for j, c in enumerate(classes)}
    obs = np.array([[idx[x] for x in r] for r in V])  # problems x agents
    P = len(V)
    onehot = np.zeros((P, A, L))
    onehot[np.arange(P)[:, None], np.arange(A)[None, :], obs] = 1.0
    T = onehot.sum(axis=1) / A
    converged = False
    it = 0
    conf = np.zeros((A, L, L))
    prior = np.full(L, 1.0 / L)
    for it in range(1, iters + 1):
        prior = (T.sum(axis=0) + smoothing) / (P + L * smoothing)
        # conf[a, k, l] = P(agent a says l | truth k)
        num = np.einsum("pk,pal->akl", T, onehot) + smoothing
        conf = num / num.sum(axis=2, keepdims=True)
        logT = np.log(prior)[None, :] + np.einsum("pal,akl->pk", onehot, np.log(conf))
        logT -= logT.max(axis=1, keepdims=True)
        newT = np.exp(logT)
        newT /= newT.sum(axis=1, keepdims=True)
        delta = np.abs(newT - T).max()
        T = newT
        if delta < tol:
            converged = True
            break
    labels = [classes[j] for j in T.argmax(axis=1)]
    return DawidSkeneResult(labels, T, classes, conf, prior, converged, it)


def borda_from_pairwise(wins: Sequence[Sequence[bool]], quality: Optional[Sequence[float]] = None) -> int:
    """Index with the most pairwise wins; ties by higher quality, then lowest index."""
    W = np.asarray(wins, dtype=bool)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("wins must be a square matrix")
    n = W.shape[0]
    if np.any(W & W.T):
        raise ValueError("wins must be antisymmetric")
    score = W.sum(axis=1)
    q = np.zeros(n) if quality is None else np.asarray(quality, dtype=float)
    return min(range(n), key=lambda i: (-score[i], -q[i], i))
