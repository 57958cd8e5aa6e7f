"""Run configuration and its ``key = value`` file format.

Values are JSON literals (``"text"``, ``5``, ``true``); unquoted values are
taken as bare strings. ``theta = "inf"`` means always aggregate. Command-line
flags override file values.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .agents import AgentSpec, BackendKind
from .executor import Executor, Limits
from .perturb import PerturbationMode
from .pipeline import Ablation, PipelineConfig

METHODS = ("scmoa", "majority_vote", "scmoa_gated")


@dataclass
class RunConfig:
    bench: Optional[str] = None
    method: str = "scmoa"
    N: int = 5
    k: int = 2
    theta: float = math.inf
    perturb_mode: str = PerturbationMode.SPUQ.value
    ablation: str = Ablation.NONE.value
    model: str = "gpt-oss-120b"
    aggregator_model: Optional[str] = None
    paraphrase_model: Optional[str] = None
    temperature: float = 0.0
    max_output_tokens: int = 4096
    seed: int = 0
    gate_on: str = "pre"
    backend: str = BackendKind.SCRIPTED.value
    fixtures: Optional[str] = None
    strict: bool = True
    cache_dir: Optional[str] = None
    out: Optional[str] = None
    workers: int = 1
    exec_command: str = "{interpreter} {solution_file}"
    exec_wall_ms: int = 10_000
    exec_mem_mb: int = 512
    failure_snippet_chars: int = 500

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.method == "scmoa_gated" and math.isinf(self.theta):
            raise ValueError("scmoa_gated needs a finite --theta")
        PerturbationMode(self.perturb_mode)
        Ablation(self.ablation)
        BackendKind(self.backend)

    def agent(self, model: Optional[str]) -> AgentSpec:
        return AgentSpec(model or self.model, self.temperature, self.max_output_tokens, BackendKind(self.backend))

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            N=self.N,
            k=self.k,
            theta=self.theta,
            perturb_mode=PerturbationMode(self.perturb_mode),
            ablation=Ablation(self.ablation),
            proposer=self.agent(None),
            aggregator=self.agent(self.aggregator_model),
            paraphraser=self.agent(self.paraphrase_model),
            seed=self.seed,
            gate_on=self.gate_on,
            failure_snippet_chars=self.failure_snippet_chars,
            workers=self.workers,
        )

    def executor(self) -> Executor:
        return Executor(command=self.exec_command, limits=Limits(self.exec_wall_ms, self.exec_mem_mb))

    # -- text format ------------------------------------------------------

    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and math.isinf(v):
                v = "inf"
            lines.append(f"{f.name} = {json.dumps(v, ensure_ascii=False)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        cfg = cls()
        cfg.update(parse_config_text(text))
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.loads(Path(path).read_text(encoding="utf-8"))

    def update(self, values: dict) -> None:
        names = {f.name: f for f in fields(self)}
        for key, raw in values.items():
            if key not in names:
                raise ValueError(f"unknown config key {key!r}")
            setattr(self, key, _coerce(names[key], raw))


def _coerce(f: dataclasses.Field, v):
    if v is None:
        return None
    t = str(f.type)
    if f.name == "theta":
        return math.inf if str(v).lower() in ("inf", "infinity", "∞") else float(v)
    if t.startswith("int"):
        return int(v)
    if t.startswith("float"):
        return float(v)
    if t.startswith("bool"):
        if isinstance(v, str):
            return v.lower() in ("1", "true", "yes", "on")
        return bool(v)
    return v if isinstance(v, str) else str(v)


def parse_config_text(text: str) -> dict:
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise ValueError(f"config line {n}: expected key = value")
        key, val = (x.strip() for x in s.split("=", 1))
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out
