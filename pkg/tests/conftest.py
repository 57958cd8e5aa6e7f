import json

import pytest

from scmoa.agents import AgentClient, CacheStore, ScriptedBackend
from scmoa.benchmark import load_benchmark
from scmoa.fixtures import TOY_QA, TOY_QA_FIXTURES, TOY_QA_MANIFEST, path
from scmoa.fixtures.builder import code_responder, qa_responder, toy_code_problem


@pytest.fixture(scope="session")
def toy_problems():
    return load_benchmark(path(TOY_QA))


@pytest.fixture(scope="session")
def toy_fixture_map():
    return json.loads(path(TOY_QA_FIXTURES).read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def toy_manifest():
    return json.loads(path(TOY_QA_MANIFEST).read_text(encoding="utf-8"))


@pytest.fixture
def toy_client(toy_fixture_map):
    return AgentClient(ScriptedBackend(toy_fixture_map, strict=True), CacheStore())


@pytest.fixture
def responder_client():
    return AgentClient(ScriptedBackend({}, strict=False, responder=qa_responder()), CacheStore())


@pytest.fixture
def code_problem():
    return toy_code_problem()


@pytest.fixture
def code_client_factory():
    def make(aggregate="broken"):
        return AgentClient(ScriptedBackend({}, strict=False, responder=code_responder(aggregate)), CacheStore())
    return make


def prompts_of(client):
    return [(req.system_prompt, req.user_prompt) for req, _ in client.log.entries]


# -- acceptance verdict lines ---------------------------------------------------

_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Context manager: times a criterion block and logs one PASS/FAIL line."""
    import contextlib
    import time

    @contextlib.contextmanager
    def run(number: int, title: str):
        t0 = time.perf_counter()
        try:
            yield
        except BaseException:
            _VERDICTS.append(f"FAIL  [{number:2d}] {title}  ({time.perf_counter() - t0:.2f} s)")
            print(_VERDICTS[-1])
            raise
        _VERDICTS.append(f"PASS  [{number:2d}] {title}  ({time.perf_counter() - t0:.2f} s)")
        print(_VERDICTS[-1])

    return run


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: s[7:10]):
            terminalreporter.write_line(line)
