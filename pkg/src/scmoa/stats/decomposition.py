"""Vote-versus-synthesis contingency tables and their fidelity/recovery decomposition."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

from scipy import stats as _st

from ..core import ScmoaError


class DegenerateMargin(ScmoaError):
    """A row of the table is empty, so one conditional rate is undefined."""


@dataclass(frozen=True)
class Contingency:
    cc: int  # vote correct, synthesis correct
    cw: int  # vote correct, synthesis wrong (harmful flip)
    wc: int  # vote wrong, synthesis correct (beneficial flip)
    ww: int

    def __post_init__(self):
        if min(self.cc, self.cw, self.wc, self.ww) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def n(self) -> int:
        return self.cc + self.cw + self.wc + self.ww

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[bool, bool]]) -> "Contingency":
        c = {"cc": 0, "cw": 0, "wc": 0, "ww": 0}
        for vote_ok, synth_ok in pairs:
            c[("c" if vote_ok else "w") + ("c" if synth_ok else "w")] += 1
        return cls(**c)

    def to_dict(self) -> dict:
        return {"cc": self.cc, "cw": self.cw, "wc": self.wc, "ww": self.ww}


@dataclass(frozen=True)
class Decomposition:
    P_c: float
    P_w: float
    F_s: Optional[float]
    R_s: Optional[float]
    advantage: float
    dominance_ratio: Optional[float]
    nondeg_threshold: Optional[float]
    degenerate: tuple[str, ...] = ()

    @property
    def dominance_holds(self) -> Optional[bool]:
        """Recovery-to-corruption ratio above P_c/P_w (equivalent to a positive advantage)."""
        if self.dominance_ratio is None or self.P_w == 0:
            return None
        return self.dominance_ratio > self.P_c / self.P_w

    def to_dict(self) -> dict:
        return {
            "P_c": self.P_c,
            "P_w": self.P_w,
            "F_s": self.F_s,
            "R_s": self.R_s,
            "advantage": self.advantage,
            "dominance_ratio": self.dominance_ratio,
            "nondeg_threshold": self.nondeg_threshold,
            "degenerate": list(self.degenerate),
        }


def decompose(t: Contingency, strict: bool = False) -> Decomposition:
    """Split the synthesis advantage into fidelity F_s and recovery R_s.

    An empty row leaves its conditional undefined (``None``), never zero;
    ``strict=True`` raises :class:`DegenerateMargin` instead.
    """
    n = t.n
    if n == 0:
        raise ValueError("empty contingency table")
    P_c = (t.cc + t.cw) / n
    P_w = (t.wc + t.ww) / n
    degenerate = []
    F_s = t.cc / (t.cc + t.cw) if t.cc + t.cw else None
    R_s = t.wc / (t.wc + t.ww) if t.wc + t.ww else None
    if F_s is None:
        degenerate.append("vote_correct_row_empty")
    if R_s is None:
        degenerate.append("vote_wrong_row_empty")
    if degenerate and strict:
        raise DegenerateMargin(", ".join(degenerate))
    advantage = (t.wc - t.cw) / n
    ratio: Optional[float] = None
    if F_s is not None and R_s is not None:
        if F_s < 1.0:
            ratio = R_s / (1.0 - F_s)
        elif R_s > 0:
            ratio = math.inf
    # an empty vote-wrong row means P_w = 0, so R_s drops out of the threshold
    denom = P_c + P_w * (R_s or 0.0)
    thr = P_c / denom if denom > 0 else None
    return Decomposition(P_c, P_w, F_s, R_s, advantage, ratio, thr, tuple(degenerate))


@dataclass(frozen=True)
class McNemar:
    chi2: float
    p: float


def mcnemar(b: int, c: int) -> McNemar:
    """Uncorrected McNemar test on the discordant counts."""
    if b < 0 or c < 0:
        raise ValueError("counts must be non-negative")
    if b + c == 0:
        return McNemar(0.0, 1.0)
    chi2 = (b - c) ** 2 / (b + c)
    return McNemar(chi2, float(_st.chi2.sf(chi2, 1)))
