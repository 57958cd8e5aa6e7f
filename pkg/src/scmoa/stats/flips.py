"""Flip classification between the vote and synthesis arms, stratified by trace diversity."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from ..core import ScmoaError
from .decomposition import Contingency
from .diversity import AllEmptyTraces, trace_diversity
from .inference import Welch, welch

STRATA = ("cc", "cw", "wc", "ww")


class IdMismatch(ScmoaError):
    pass


@dataclass(frozen=True)
class Stratum:
    n: int
    mean: Optional[float]
    std: Optional[float]


@dataclass
class FlipAnalysis:
    contingency: Contingency
    beneficial: list = field(default_factory=list)  # vote wrong, synthesis right
    harmful: list = field(default_factory=list)  # vote right, synthesis wrong
    classes: dict = field(default_factory=dict)  # id -> stratum key
    diversity: dict = field(default_factory=dict)  # id -> D_t
    degenerate: list = field(default_factory=list)
    strata: dict = field(default_factory=dict)  # stratum key -> Stratum
    welch_beneficial_vs_harmful: Optional[Welch] = None
    welch_flipped_vs_unflipped: Optional[Welch] = None


def _stratum(vals: list[float]) -> Stratum:
    if not vals:
        return Stratum(0, None, None)
    a = np.asarray(vals)
    return Stratum(len(a), float(a.mean()), float(a.std(ddof=1)) if len(a) > 1 else None)


def _try_welch(x, y):
    return welch(x, y) if len(x) >= 2 and len(y) >= 2 else None


def flip_analysis(
    vote: Mapping[str, object],
    synth: Mapping[str, object],
    gold: Optional[Mapping[str, str]] = None,
    traces: Optional[Mapping[str, Sequence[str]]] = None,
) -> FlipAnalysis:
    """Classify every problem as cc / cw / wc / ww.

    ``vote`` and ``synth`` map problem id to correctness booleans, or to
    normalized answers when ``gold`` is given. ``traces`` (id -> proposal
    traces) adds D_t strata; D_t of exactly 0 or undefined is excluded.
    """
    if set(vote) != set(synth) or (gold is not None and set(gold) != set(vote)):
        raise IdMismatch("vote, synthesis and gold must cover the same problem ids")

    def ok(arm, pid) -> bool:
        v = arm[pid]
        return bool(v) if gold is None else v == gold[pid]

    res = FlipAnalysis(Contingency(0, 0, 0, 0))
    pairs = []
    for pid in sorted(vote):
        v, s = ok(vote, pid), ok(synth, pid)
        pairs.append((v, s))
        key = ("c" if v else "w") + ("c" if s else "w")
        res.classes[pid] = key
        if key == "wc":
            res.beneficial.append(pid)
        elif key == "cw":
            res.harmful.append(pid)
    res.contingency = Contingency.from_pairs(pairs)
    if traces is None:
        return res
    by = {k: [] for k in STRATA}
    for pid, key in res.classes.items():
        ts = list(traces.get(pid, ()))
        if len(ts) < 2:
            res.degenerate.append(pid)
            continue
        try:
            d = trace_diversity(ts)
        except AllEmptyTraces:
            res.degenerate.append(pid)
            continue
        if d == 0.0:
            res.degenerate.append(pid)
            continue
        res.diversity[pid] = d
        by[key].append(d)
    res.strata = {k: _stratum(v) for k, v in by.items()}
    res.welch_beneficial_vs_harmful = _try_welch(by["wc"], by["cw"])
    res.welch_flipped_vs_unflipped = _try_welch(by["wc"] + by["cw"], by["cc"] + by["ww"])
    return res
