"""Tables computed from RunRecord batches: accuracy, gate sweep, decomposition, calibration, flips."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .consensus import FidelityGapReport, fidelity_gap_report
from .core import RunRecord
from .pipeline import gate_simulation
from .stats import (
    CalibrationReport,
    Contingency,
    Decomposition,
    FlipAnalysis,
    IdMismatch,
    McNemar,
    bootstrap_diff_ci,
    calibration,
    decompose,
    flip_analysis,
    mcnemar,
)
from .stats.inference import BootstrapCI

THETAS = (0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, math.inf)


@dataclass
class AccuracyRow:
    method: str
    n: int
    accuracy: float
    mean_calls: float
    mean_calls_raw: float
    mean_tokens: float
    override_rate: float
    gated_rate: float
    mean_C_pre: Optional[float]
    mean_C_post: Optional[float]


@dataclass
class Report:
    accuracy: list[AccuracyRow]
    theta_sweep: dict = field(default_factory=dict)
    contingency: Optional[Contingency] = None
    decomposition: Optional[Decomposition] = None
    mcnemar: Optional[McNemar] = None
    bootstrap: Optional[BootstrapCI] = None
    calibration: Optional[CalibrationReport] = None
    fidelity_gap: Optional[FidelityGapReport] = None
    flips: Optional[FlipAnalysis] = None


def _mean(xs) -> Optional[float]:
    xs = [x for x in xs if x is not None]
    return sum(xs) / len(xs) if xs else None


def accuracy_row(records: Sequence[RunRecord]) -> AccuracyRow:
    n = len(records)
    methods = sorted({r.method for r in records})
    return AccuracyRow(
        "+".join(methods),
        n,
        sum(bool(r.correct) for r in records) / n,
        _mean(r.calls.get("headline", 0) for r in records) or 0.0,
        _mean(r.calls.get("total", 0) for r in records) or 0.0,
        _mean(r.tokens.get("total", 0) for r in records) or 0.0,
        sum(r.override_fired for r in records) / n,
        sum(r.gated for r in records) / n,
        _mean(r.C_pre for r in records),
        _mean(r.C_post for r in records),
    )


def vote_arm(records: Sequence[RunRecord], vote_records: Optional[Sequence[RunRecord]] = None) -> dict:
    """problem id -> vote correctness, from a separate vote file or the records themselves."""
    if vote_records is None:
        return {r.problem_id: bool(r.vote_correct) for r in records}
    v = {r.problem_id: bool(r.correct) for r in vote_records}
    if set(v) != {r.problem_id for r in records}:
        raise IdMismatch("vote records cover different problem ids")
    return v


def proposal_traces(r: RunRecord) -> list[str]:
    return [p["best_sample"]["trace"] for p in r.proposals_pre]


def build_report(
    records: Sequence[RunRecord],
    vote_records: Optional[Sequence[RunRecord]] = None,
    bins: int = 10,
    resamples: int = 10_000,
    seed: int = 0,
    thetas: Sequence[float] = THETAS,
) -> Report:
    if not records:
        raise ValueError("no records")
    ids = [r.problem_id for r in records]
    if len(set(ids)) != len(ids):
        raise IdMismatch("duplicate problem ids in records")
    rows = [accuracy_row(records)]
    if vote_records is not None:
        rows.append(accuracy_row(vote_records))
    rep = Report(rows)
    rep.theta_sweep = gate_simulation(records, thetas)
    scored = [r for r in records if r.correct is not None]
    vote = vote_arm(scored, vote_records and [v for v in vote_records if v.problem_id in set(ids)])
    synth = {r.problem_id: bool(r.correct) for r in scored}
    rep.flips = flip_analysis(vote, synth, traces={r.problem_id: proposal_traces(r) for r in scored})
    rep.contingency = rep.flips.contingency
    rep.decomposition = decompose(rep.contingency)
    rep.mcnemar = mcnemar(rep.contingency.wc, rep.contingency.cw)
    order = sorted(synth)
    rep.bootstrap = bootstrap_diff_ci([synth[i] for i in order], [vote[i] for i in order], resamples, seed)
    with_c = [r for r in scored if r.C_post is not None]
    if with_c:
        rep.calibration = calibration([r.C_post for r in with_c], [bool(r.correct) for r in with_c], bins)
    code = [r for r in records if "public_pass_all" in (r.evaluation.get("final") or {})]
    if code:
        rep.fidelity_gap = fidelity_gap_report(code)
    return rep


# -- rendering ----------------------------------------------------------------


def _fmt(x, pct: bool = False) -> str:
    if x is None:
        return "-"
    if isinstance(x, bool):
        return str(x)
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return f"{100 * x:.1f}" if pct else f"{x:.4f}"


def _table(head: Sequence[str], body: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(c)) for c in col) for col in zip(head, *body)]
    return "\n".join("  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip() for row in (head, *body))


def report_rows(rep: Report) -> list[tuple[str, str, str]]:
    """Long-format (section, key, value) rows; the CSV and text views both come from here."""
    out = []
    for a in rep.accuracy:
        for k in ("n", "accuracy", "mean_calls", "mean_calls_raw", "mean_tokens", "override_rate", "gated_rate",
                  "mean_C_pre", "mean_C_post"):
            out.append((f"accuracy:{a.method}", k, _fmt(getattr(a, k), pct=k in ("accuracy", "override_rate", "gated_rate"))))
    for th, acc in rep.theta_sweep.items():
        out.append(("theta_sweep", _fmt(th) if math.isinf(th) else f"{th:.1f}", _fmt(acc, pct=True)))
    if rep.contingency:
        for k, v in rep.contingency.to_dict().items():
            out.append(("contingency", k, str(v)))
    if rep.decomposition:
        for k, v in rep.decomposition.to_dict().items():
            if k != "degenerate":
                out.append(("decomposition", k, _fmt(v)))
    if rep.mcnemar:
        out += [("mcnemar", "chi2", f"{rep.mcnemar.chi2:.2f}"), ("mcnemar", "p", f"{rep.mcnemar.p:.3f}")]
    if rep.bootstrap:
        b = rep.bootstrap
        out += [("bootstrap", "delta", _fmt(b.delta)), ("bootstrap", "lo95", _fmt(b.lo95)), ("bootstrap", "hi95", _fmt(b.hi95))]
    if rep.calibration:
        c = rep.calibration
        out += [("calibration", "ece", _fmt(c.ece)), ("calibration", "auroc", _fmt(c.auroc))]
        for b in c.bins:
            if b.count:
                out.append(("calibration", f"bin[{b.lo:.1f},{b.hi:.1f}]", f"n={b.count} conf={b.mean_conf:.3f} acc={b.mean_acc:.3f}"))
        for cov, acc in c.abstention_curve:
            out.append(("abstention", f"coverage={cov:.3f}", _fmt(acc, pct=True)))
    if rep.fidelity_gap:
        g = rep.fidelity_gap
        out += [("fidelity_gap", "pub_pass_count", str(g.pub_pass_count)),
                ("fidelity_gap", "P_priv_given_pub", _fmt(g.P_priv_given_pub)),
                ("fidelity_gap", "false_positive_rate", _fmt(g.false_positive_rate))]
    if rep.flips:
        f = rep.flips
        out += [("flips", "beneficial", ",".join(f.beneficial) or "-"), ("flips", "harmful", ",".join(f.harmful) or "-")]
        for k, s in f.strata.items():
            out.append(("diversity", k, f"n={s.n} mean={_fmt(s.mean)} std={_fmt(s.std)}"))
        if f.welch_beneficial_vs_harmful:
            w = f.welch_beneficial_vs_harmful
            out.append(("diversity", "welch_wc_vs_cw", f"t={w.t:.3f} df={w.df:.1f} p={w.p:.3f}"))
    return out


def render_text(rep: Report) -> str:
    parts = []
    acc_head = ("method", "n", "acc%", "calls", "calls_raw", "tokens", "override%", "gated%", "C_pre", "C_post")
    parts.append(_table(acc_head, [
        (a.method, a.n, _fmt(a.accuracy, True), f"{a.mean_calls:.1f}", f"{a.mean_calls_raw:.1f}", f"{a.mean_tokens:.0f}",
         _fmt(a.override_rate, True), _fmt(a.gated_rate, True), _fmt(a.mean_C_pre), _fmt(a.mean_C_post))
        for a in rep.accuracy
    ]))
    rows = report_rows(rep)
    for section in dict.fromkeys(s for s, _, _ in rows):
        if section.startswith("accuracy:"):
            continue
        body = [(k, v) for s, k, v in rows if s == section]
        parts.append(f"[{section}]\n" + _table(("key", "value"), body))
    return "\n\n".join(parts) + "\n"


def render_csv(rep: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("section", "key", "value"))
    w.writerows(report_rows(rep))
    return buf.getvalue()
