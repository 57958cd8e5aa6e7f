"""``scmoa`` command line: run, report, verify-theory, stats."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from .agents import AgentClient, BackendKind, BackendUnavailable, CacheStore, HttpBackend, MissingFixture, ScriptedBackend
from .benchmark import ParseError, load_benchmark
from .config import METHODS, RunConfig
from .core import RunRecord, read_records, write_records
from .pipeline import Ablation, Pipeline
from .perturb import PerturbationMode

log = logging.getLogger("scmoa")


def _theta(s: str) -> float:
    return math.inf if s.lower() in ("inf", "infinity") else float(s)


# -- run ----------------------------------------------------------------------

RUN_FLAGS = {
    # flag -> RunConfig field
    "bench": "bench", "method": "method", "N": "N", "k": "k", "theta": "theta",
    "perturb_mode": "perturb_mode", "ablation": "ablation", "paraphrase_model": "paraphrase_model",
    "model": "model", "aggregator_model": "aggregator_model", "seed": "seed", "cache_dir": "cache_dir",
    "out": "out", "workers": "workers", "exec_wall_ms": "exec_wall_ms", "exec_mem_mb": "exec_mem_mb",
    "exec_command": "exec_command", "fixtures": "fixtures", "backend": "backend", "strict": "strict",
    "gate_on": "gate_on", "temperature": "temperature",
}


def add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--bench", help="benchmark JSONL")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--N", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--theta", type=_theta, help="consensus gate threshold, or inf")
    p.add_argument("--perturb-mode", choices=[m.value for m in PerturbationMode])
    p.add_argument("--ablation", choices=[a.value for a in Ablation])
    p.add_argument("--model", help="proposer/refiner model id")
    p.add_argument("--aggregator-model")
    p.add_argument("--paraphrase-model")
    p.add_argument("--temperature", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--gate-on", choices=["pre", "post"])
    p.add_argument("--backend", choices=[b.value for b in BackendKind])
    p.add_argument("--fixtures", help="scripted-backend fixture JSON (cache key -> response)")
    p.add_argument("--strict", dest="strict", action="store_true", default=None)
    p.add_argument("--no-strict", dest="strict", action="store_false")
    p.add_argument("--cache-dir")
    p.add_argument("--out", help="RunRecord JSONL output")
    p.add_argument("--workers", type=int)
    p.add_argument("--exec-command")
    p.add_argument("--exec-wall-ms", type=int)
    p.add_argument("--exec-mem-mb", type=int)


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for flag, fname in RUN_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            setattr(cfg, fname, v)
    if cfg.method == "scmoa" and not math.isinf(cfg.theta):
        cfg.method = "scmoa_gated"
    cfg.validate()
    return cfg


def build_client(cfg: RunConfig) -> AgentClient:
    if BackendKind(cfg.backend) is BackendKind.SCRIPTED:
        fixtures = {}
        if cfg.fixtures:
            fixtures = json.loads(Path(cfg.fixtures).read_text(encoding="utf-8"))
        backend = ScriptedBackend(fixtures, strict=cfg.strict)
    else:
        backend = HttpBackend()
    return AgentClient(backend, CacheStore(cfg.cache_dir))


def summarize(records: Sequence[RunRecord], backend_calls: int) -> str:
    n = len(records)
    scored = [r for r in records if r.correct is not None]
    acc = 100.0 * sum(bool(r.correct) for r in scored) / len(scored) if scored else float("nan")
    mean = lambda xs: sum(xs) / len(xs) if xs else float("nan")  # noqa: E731
    cpre = [r.C_pre for r in records if r.C_pre is not None]
    cpost = [r.C_post for r in records if r.C_post is not None]
    return (
        f"n={n} accuracy={acc:.1f}% "
        f"calls={mean([r.calls.get('headline', 0) for r in records]):.1f} "
        f"calls_raw={mean([r.calls.get('total', 0) for r in records]):.1f} "
        f"tokens={mean([r.tokens.get('total', 0) for r in records]):.1f} "
        f"override={100.0 * mean([r.override_fired for r in records]):.1f}% "
        f"gated={sum(r.gated for r in records)} "
        f"C_pre={mean(cpre):.3f} C_post={mean(cpost):.3f} "
        f"backend_calls={backend_calls}"
    )


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = config_from_args(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not cfg.bench:
        print("error: --bench is required", file=sys.stderr)
        return 2
    try:
        problems = load_benchmark(cfg.bench)
    except (OSError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print("# config\n" + cfg.dumps(), file=sys.stderr, end="")
    client = build_client(cfg)
    pipe = Pipeline(client, cfg.pipeline_config(), cfg.executor())
    fn = pipe.run_majority_vote if cfg.method == "majority_vote" else pipe.run_scmoa
    records: list[RunRecord] = []
    status = 0
    # problems run concurrently but are collected in benchmark order so partial output is a prefix
    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        futures = [pool.submit(fn, p) for p in problems]
        for p, fut in zip(problems, futures):
            try:
                records.append(fut.result())
            except (BackendUnavailable, MissingFixture) as exc:
                print(f"error: problem {p.id}: {exc}", file=sys.stderr)
                status = 1
                for f in futures:
                    f.cancel()
                break
    if cfg.out:
        write_records(cfg.out, records)
    print(f"method={cfg.method} " + summarize(records, client.backend_calls))
    return status


# -- report -------------------------------------------------------------------


def cmd_report(args: argparse.Namespace) -> int:
    from .report import build_report, render_csv, render_text
    from .stats import IdMismatch

    records = [r for path in args.records for r in read_records(path)]
    vote = [r for path in args.vote for r in read_records(path)] if args.vote else None
    try:
        rep = build_report(records, vote, bins=args.bins, resamples=args.resamples, seed=args.seed)
    except IdMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(render_text(rep))
    if args.csv:
        Path(args.csv).write_text(render_csv(rep), encoding="utf-8")
    return 0


# -- verify-theory ------------------------------------------------------------


def cmd_verify_theory(args: argparse.Namespace) -> int:
    from .theory.suite import SUITES, SuiteConfig, format_table, run_suites

    cfg = SuiteConfig(
        seed=args.seed,
        trials=args.trials,
        refine_trials=args.refine_trials,
        refine_params=args.refine_params,
        n_sigma=args.sigma,
        p_mins=tuple(args.p_min) if args.p_min else SuiteConfig().p_mins,
        answer_space=args.answer_space,
    )
    names = args.suite or list(SUITES)
    try:
        rows = run_suites(cfg, names)
    except ValueError as exc:
        print(f"error: precondition violated: {exc}", file=sys.stderr)
        return 2
    print(format_table(rows))
    failed = [r for r in rows if not r.passed]
    print(f"{len(rows) - len(failed)}/{len(rows)} rows within tolerance")
    for r in failed:
        print(f"FAILED {r.suite}: {r.case} expected={r.expected} empirical={r.empirical} sigma={r.sigma}", file=sys.stderr)
    return 1 if failed else 0


# -- stats --------------------------------------------------------------------


def _load_json(path: str):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def cmd_stats(args: argparse.Namespace) -> int:
    from . import stats as S

    tool = args.tool
    if tool == "decompose":
        d = S.decompose(S.Contingency(args.cc, args.cw, args.wc, args.ww))
        out = d.to_dict()
    elif tool == "mcnemar":
        m = S.mcnemar(args.b, args.c)
        out = {"chi2": m.chi2, "p": m.p}
    elif tool == "bootstrap":
        data = _load_json(args.file)
        ci = S.bootstrap_diff_ci(data["a"], data["b"], args.resamples, args.seed)
        out = ci.__dict__
    elif tool == "kappa":
        out = {"kappa": S.fleiss_kappa(_load_json(args.file))}
    elif tool == "dawid-skene":
        r = S.dawid_skene(_load_json(args.file), iters=args.iters)
        out = {"labels": r.labels, "converged": r.converged, "iterations": r.iterations}
    elif tool == "borda":
        data = _load_json(args.file)
        out = {"winner": S.borda_from_pairwise(data["wins"], data.get("quality"))}
    elif tool == "diversity":
        out = {"D_t": S.trace_diversity(_load_json(args.file))}
    elif tool == "correlation":
        r = S.error_correlation_report(_load_json(args.file), args.resamples, args.seed)
        out = r.__dict__
    elif tool == "calibration":
        records = read_records(args.file)
        rep = S.calibration([r.C_post for r in records], [bool(r.correct) for r in records], args.bins)
        out = rep.to_dict()
    else:  # pragma: no cover - argparse restricts choices
        raise AssertionError(tool)
    print(json.dumps(out, indent=1, sort_keys=True, default=lambda x: None if x is None else str(x)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scmoa", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a method over a benchmark")
    add_run_args(run)
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="tables from RunRecord files")
    rep.add_argument("records", nargs="+")
    rep.add_argument("--vote", nargs="*", help="separate majority-vote RunRecord files")
    rep.add_argument("--csv")
    rep.add_argument("--bins", type=int, default=10)
    rep.add_argument("--resamples", type=int, default=10_000)
    rep.add_argument("--seed", type=int, default=0)
    rep.set_defaults(func=cmd_report)

    vt = sub.add_parser("verify-theory", help="Monte-Carlo and closed-form proposition checks")
    vt.add_argument("--seed", type=int, default=20240601)
    vt.add_argument("--trials", type=int, default=100_000)
    vt.add_argument("--refine-trials", type=int, default=10_000)
    vt.add_argument("--refine-params", type=int, default=50)
    vt.add_argument("--sigma", type=float, default=3.0, help="tolerance in Monte-Carlo standard errors")
    vt.add_argument("--p-min", type=float, nargs="+", help="override the fidelity-grid competences")
    vt.add_argument("--answer-space", type=int, default=4)
    vt.add_argument("--suite", nargs="+", choices=["jury", "vote", "fidelity", "anchoring", "stratified", "closed_form"])
    vt.set_defaults(func=cmd_verify_theory)

    st = sub.add_parser("stats", help="individual statistics tools")
    st.add_argument("tool", choices=["decompose", "mcnemar", "bootstrap", "kappa", "dawid-skene", "borda",
                                     "diversity", "correlation", "calibration"])
    st.add_argument("--file", help="JSON input (RunRecord JSONL for calibration)")
    for name in ("cc", "cw", "wc", "ww", "b", "c"):
        st.add_argument(f"--{name}", type=int, default=0)
    st.add_argument("--resamples", type=int, default=10_000)
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--iters", type=int, default=100)
    st.add_argument("--bins", type=int, default=10)
    st.set_defaults(func=cmd_stats)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
