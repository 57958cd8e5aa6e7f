"""Trace diversity: mean pairwise cosine distance in a per-problem TF-IDF space."""

from __future__ import annotations

import re
from collections import Counter
from functools import lru_cache
from importlib import resources
from typing import Sequence

import numpy as np

from ..core import ScmoaError

MAX_FEATURES = 5000
_TOKEN = re.compile(r"[a-z0-9]{2,}")


class AllEmptyTraces(ScmoaError):
    """No trace has a single in-vocabulary term; D_t is undefined."""


@lru_cache(maxsize=None)
def stop_words() -> frozenset[str]:
    text = resources.files("scmoa").joinpath("data/stopwords_en.txt").read_text(encoding="utf-8")
    return frozenset(w for w in text.split() if w)


def tokenize(text: str) -> list[str]:
    sw = stop_words()
    return [t for t in _TOKEN.findall(text.lower()) if t not in sw]


def tfidf_matrix(docs: Sequence[str], max_features: int = MAX_FEATURES) -> tuple[np.ndarray, list[str]]:
    """L2-normalised TF-IDF rows and the vocabulary (capped by corpus frequency)."""
    toks = [tokenize(d) for d in docs]
    freq = Counter(t for ts in toks for t in ts)
    vocab = sorted(sorted(freq, key=lambda w: (-freq[w], w))[:max_features])
    col = {w: j for j, w in enumerate(vocab)}
    X = np.zeros((len(docs), len(vocab)))
    for i, ts in enumerate(toks):
        for t in ts:
            j = col.get(t)
            if j is not None:
                X[i, j] += 1
    n = len(docs)
    df = (X > 0).sum(axis=0)
    X *= np.log((1 + n) / (1 + df)) + 1.0
    norms = np.linalg.norm(X, axis=1)
    nz = norms > 0
    X[nz] /= norms[nz, None]
    return X, vocab


def trace_diversity(traces: Sequence[str]) -> float:
    """Mean over pairs of ``1 - cos``. Empty-vector traces count as orthogonal."""
    if len(traces) < 2:
        raise ValueError("need at least two traces")
    X, _ = tfidf_matrix(traces)
    if X.shape[1] == 0 or not np.any(X):
        raise AllEmptyTraces("no trace contains an in-vocabulary term")
    sims = X @ X.T
    iu = np.triu_indices(len(traces), k=1)
    return float(np.mean(1.0 - np.clip(sims[iu], -1.0, 1.0)))
