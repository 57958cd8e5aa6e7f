"""Consensus as confidence: reliability bins, ECE, selective-prediction AUROC."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from ..core import ScmoaError


class EmptyInput(ScmoaError):
    pass


@dataclass(frozen=True)
class Bin:
    lo: float
    hi: float
    count: int
    mean_conf: Optional[float]
    mean_acc: Optional[float]


@dataclass(frozen=True)
class CalibrationReport:
    bins: list[Bin]
    ece: float
    auroc: Optional[float]
    abstention_curve: list[tuple[float, float]]  # (coverage, accuracy)
    n: int

    def to_dict(self) -> dict:
        return {
            "bins": [b.__dict__ for b in self.bins],
            "ece": self.ece,
            "auroc": self.auroc,
            "abstention_curve": [{"coverage": c, "accuracy": a} for c, a in self.abstention_curve],
            "n": self.n,
        }


def auroc(scores: Sequence[float], labels: Sequence[bool]) -> Optional[float]:
    """P(score of a random positive > random negative), ties counted one half."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    npos, nneg = int(y.sum()), int((~y).sum())
    if npos == 0 or nneg == 0:
        return None
    r = rankdata(s)
    return float((r[y].sum() - npos * (npos + 1) / 2) / (npos * nneg))


def abstention_curve(scores: Sequence[float], labels: Sequence[bool]) -> list[tuple[float, float]]:
    """Accuracy when answering only items at or above each distinct score, highest first."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=float)
    n = len(s)
    out = []
    for v in np.unique(s)[::-1]:
        keep = s >= v
        out.append((float(keep.sum() / n), float(y[keep].mean())))
    return out


def calibration(consensus: Sequence[float], correct: Sequence[bool], bins: int = 10) -> CalibrationReport:
    c = np.asarray(consensus, dtype=float)
    y = np.asarray(correct, dtype=bool)
    if c.size == 0:
        raise EmptyInput("no items")
    if c.shape != y.shape:
        raise ValueError("consensus and correct differ in length")
    if np.any((c < 0) | (c > 1)):
        raise ValueError("consensus must lie in [0,1]")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    idx = np.minimum((c * bins).astype(int), bins - 1)
    n = len(c)
    out, ece = [], 0.0
    for b in range(bins):
        m = idx == b
        cnt = int(m.sum())
        if cnt:
            conf, acc = float(c[m].mean()), float(y[m].mean())
            ece += cnt / n * abs(conf - acc)
            out.append(Bin(b / bins, (b + 1) / bins, cnt, conf, acc))
        else:
            out.append(Bin(b / bins, (b + 1) / bins, 0, None, None))
    return CalibrationReport(out, ece, auroc(c, y), abstention_curve(c, y), n)
