"""Subprocess test runner for code proposals.

Each test gets a fresh temp directory, the solution written to a file and a
configurable command template such as ``{interpreter} {solution_file}``. The
child runs with an empty environment (no proxy variables), a wall-clock
timeout and an address-space limit. Network isolation beyond that is the
responsibility of the host sandbox.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .core import ScmoaError, TestCase


class ExecutorFailure(ScmoaError):
    """The sandbox itself failed (as opposed to a solution failing a test)."""


@dataclass(frozen=True)
class Limits:
    wall_ms: int = 10_000
    mem_mb: int = 512


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    name: str
    passed: bool
    stdout: str
    stderr: str
    timed_out: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "stdout": self.stdout,
                "stderr": self.stderr, "timed_out": self.timed_out}


def outputs_match(actual: str, expected: str) -> bool:
    """Compare after trimming trailing whitespace per line and blank edges."""
    def norm(s: str) -> list[str]:
        return [ln.rstrip() for ln in s.strip().splitlines()]
    return norm(actual) == norm(expected)


@dataclass
class Executor:
    command: str = "{interpreter} {solution_file}"
    interpreter: str = sys.executable
    limits: Limits = Limits()
    workers: int = 4
    output_cap: int = 2000

    def _preexec(self):
        mem = self.limits.mem_mb
        def limit():
            import resource
            b = mem * 1024 * 1024
            resource.setrlimit(resource.RLIMIT_AS, (b, b))
        return limit

    def run_one(self, solution: str, test: TestCase) -> TestResult:
        with tempfile.TemporaryDirectory(prefix="scmoa-exec-") as tmp:
            path = os.path.join(tmp, "solution.py")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(solution)
            argv = shlex.split(self.command.format(interpreter=self.interpreter, solution_file=path))
            try:
                proc = subprocess.run(
                    argv,
                    input=test.stdin,
                    capture_output=True,
                    text=True,
                    cwd=tmp,
                    env={"PATH": os.environ.get("PATH", "/usr/bin:/bin"), "PYTHONHASHSEED": "0"},
                    timeout=self.limits.wall_ms / 1000.0,
                    preexec_fn=self._preexec(),
                )
            except subprocess.TimeoutExpired as exc:
                out = exc.stdout.decode() if isinstance(exc.stdout, bytes) else (exc.stdout or "")
                return TestResult(test.name, False, out[: self.output_cap], "timed out", True)
            except OSError as exc:
                raise ExecutorFailure(f"cannot launch {argv[0]!r}: {exc}") from exc
        passed = proc.returncode == 0 and outputs_match(proc.stdout, test.expected_stdout)
        return TestResult(test.name, passed, proc.stdout[: self.output_cap], proc.stderr[: self.output_cap], False)

    def run_tests(self, solution: str, tests: Sequence[TestCase]) -> list[TestResult]:
        if len(tests) <= 1 or self.workers <= 1:
            return [self.run_one(solution, t) for t in tests]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(lambda t: self.run_one(solution, t), tests))


def run_tests(solution: str, tests: Sequence[TestCase], limits: Limits = Limits(), executor: Executor | None = None):
    ex = executor or Executor(limits=limits)
    return ex.run_tests(solution, tests)
