import http.server
import json
import random
import threading

import pytest

from scmoa.agents import (
    AgentClient,
    AgentSpec,
    BackendKind,
    BackendUnavailable,
    CacheStore,
    ChatRequest,
    ChatResponse,
    HttpBackend,
    MissingFixture,
    ScriptedBackend,
    cache_key,
    make_variant_tag,
    with_variant_tag,
)

AG = AgentSpec("m")


def req(user="hello", system="sys", model="m"):
    return ChatRequest(system, user, AgentSpec(model))


def test_cache_key_is_deterministic_hex():
    k = cache_key(req())
    assert k == cache_key(req()) and len(k) == 64 and int(k, 16) >= 0
    assert k == k.lower()


def test_cache_key_frozen_value():
    import hashlib

    assert cache_key(req()) == hashlib.sha256(b"m\x00sys\x00hello").hexdigest()


def test_separator_prevents_boundary_ambiguity():
    assert cache_key(req(user="bc", system="a")) != cache_key(req(user="c", system="ab"))


def test_variant_tag_changes_key():
    tagged = with_variant_tag("hello", make_variant_tag("scmoa", "analytical", 0))
    assert tagged.endswith("<!-- sample variant: scmoa-analytical-0 -->")
    assert cache_key(req(tagged)) != cache_key(req())


@pytest.mark.parametrize(
    "args,expected",
    [
        (("scmoa", "analytical", 0), "<!-- sample variant: scmoa-analytical-0 -->"),
        (("sc", "0", 3), "<!-- sample variant: sc-0-3 -->"),
    ],
)
def test_variant_tag_format(args, expected):
    assert make_variant_tag(*args) == expected


def test_variant_tag_applied_once():
    once = with_variant_tag("q", make_variant_tag("sc", "0", 1))
    with pytest.raises(ValueError):
        with_variant_tag(once, make_variant_tag("sc", "0", 2))
    with pytest.raises(ValueError):
        make_variant_tag("sc", "0", -1)


def test_negative_temperature_rejected():
    with pytest.raises(ValueError):
        AgentSpec("m", temperature=-0.1)


def test_scripted_fixture_echo_and_cache_hit():
    r = req()
    client = AgentClient(ScriptedBackend({cache_key(r): "Answer: B"}))
    first = client.complete(r)
    second = client.complete(r)
    assert first.text == "Answer: B" and not first.from_cache
    assert second.from_cache and second.text == first.text
    assert client.backend_calls == 1


def test_strict_missing_fixture():
    with pytest.raises(MissingFixture):
        AgentClient(ScriptedBackend({}, strict=True)).complete(req())


def test_lenient_missing_fixture_returns_empty():
    assert AgentClient(ScriptedBackend({}, strict=False)).complete(req()).text == ""


def test_file_cache_layout_and_reload(tmp_path):
    r = req()
    k = cache_key(r)
    AgentClient(ScriptedBackend({k: "x"}), CacheStore(tmp_path)).complete(r)
    f = tmp_path / k[:2] / f"{k}.json"
    entry = json.loads(f.read_text())
    assert entry["request"]["user_prompt"] == "hello" and entry["response"]["text"] == "x"
    fresh = AgentClient(ScriptedBackend({}, strict=True), CacheStore(tmp_path))
    assert fresh.complete(r).from_cache and fresh.backend_calls == 0


def test_concurrent_identical_calls_agree(tmp_path):
    r = req()
    client = AgentClient(ScriptedBackend({cache_key(r): "same"}), CacheStore(tmp_path))
    out = []
    threads = [threading.Thread(target=lambda: out.append(client.complete(r).text)) for _ in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert out == ["same"] * 16


class Flaky:
    def __init__(self, failures):
        self.failures = failures
        self.calls = 0

    def __call__(self, r):
        self.calls += 1
        if self.calls <= self.failures:
            raise BackendUnavailable("down")
        return ChatResponse("ok", 1, 1)


def test_retry_then_success():
    b = Flaky(3)
    client = AgentClient(b, backoff_base=0.001, backoff_cap=0.002, rng=random.Random(0))
    assert client.complete(req()).text == "ok"
    assert b.calls == 4


def test_gives_up_after_five_attempts():
    b = Flaky(100)
    client = AgentClient(b, backoff_base=0.001, backoff_cap=0.002)
    with pytest.raises(BackendUnavailable):
        client.complete(req())
    assert b.calls == 5


class _Handler(http.server.BaseHTTPRequestHandler):
    status = 200
    seen = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        _Handler.seen.append((self.path, body, self.headers.get("Authorization")))
        if _Handler.status != 200:
            self.send_response(_Handler.status)
            self.end_headers()
            return
        payload = json.dumps({
            "choices": [{"message": {"role": "assistant", "content": "Answer: C"}}],
            "usage": {"prompt_tokens": 7, "completion_tokens": 2},
        }).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *a):
        pass


@pytest.fixture
def server():
    srv = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    _Handler.seen.clear()
    _Handler.status = 200
    yield f"http://127.0.0.1:{srv.server_address[1]}"
    srv.shutdown()


def test_http_backend_wire_format(server, monkeypatch):
    monkeypatch.setenv("SCMOA_API_BASE", server)
    monkeypatch.setenv("SCMOA_API_KEY", "secret")
    resp = AgentClient(HttpBackend()).complete(ChatRequest("S", "U", AgentSpec("gpt", backend=BackendKind.HTTP)))
    assert (resp.text, resp.tokens_in, resp.tokens_out) == ("Answer: C", 7, 2)
    path, body, auth = _Handler.seen[0]
    assert path == "/v1/chat/completions" and auth == "Bearer secret"
    assert body["model"] == "gpt" and body["temperature"] == 0.0
    assert body["messages"] == [{"role": "system", "content": "S"}, {"role": "user", "content": "U"}]


def test_http_5xx_is_retried_then_unavailable(server):
    _Handler.status = 503
    client = AgentClient(HttpBackend(server, ""), backoff_base=0.001, backoff_cap=0.001)
    with pytest.raises(BackendUnavailable):
        client.complete(req())
    assert len(_Handler.seen) == 5


def test_http_unreachable():
    client = AgentClient(HttpBackend("http://127.0.0.1:9", "", timeout=0.5), backoff_base=0.001, backoff_cap=0.001)
    with pytest.raises(BackendUnavailable):
        client.complete(req())


def test_http_requires_base(monkeypatch):
    monkeypatch.delenv("SCMOA_API_BASE", raising=False)
    with pytest.raises(BackendUnavailable):
        HttpBackend()
