"""Chat-completion backends behind a content-hash cache.

This is the only module allowed to talk to a model. Two backends exist: an
OpenAI-compatible HTTP client and a scripted backend that serves fixture
responses keyed by :func:`cache_key`, so the whole pipeline runs offline.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import requests

from .core import ScmoaError

log = logging.getLogger(__name__)

MAX_ATTEMPTS = 5


class BackendUnavailable(ScmoaError):
    """Backend could not be reached after all retry attempts."""


class MissingFixture(ScmoaError):
    """Scripted backend in strict mode has no fixture for a request."""


class BackendKind(str, enum.Enum):
    HTTP = "http_openai_compatible"
    SCRIPTED = "scripted"


@dataclass(frozen=True)
class AgentSpec:
    model_id: str
    temperature: float = 0.0
    max_output_tokens: int = 4096
    backend: BackendKind = BackendKind.SCRIPTED

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "backend": self.backend.value,
        }


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_prompt: str
    agent: AgentSpec


@dataclass(frozen=True)
class ChatResponse:
    text: str
    tokens_in: int
    tokens_out: int
    from_cache: bool = False


def cache_key(req: ChatRequest) -> str:
    h = hashlib.sha256()
    h.update(req.agent.model_id.encode("utf-8"))
    h.update(b"\x00")
    h.update(req.system_prompt.encode("utf-8"))
    h.update(b"\x00")
    h.update(req.user_prompt.encode("utf-8"))
    return h.hexdigest()


VARIANT_TAG_PREFIX = "<!-- sample variant: "


def make_variant_tag(method_prefix: str, persona_or_index: str, sample_index: int) -> str:
    if sample_index < 0:
        raise ValueError("sample_index must be >= 0")
    return f"<!-- sample variant: {method_prefix}-{persona_or_index}-{sample_index} -->"


def with_variant_tag(user_prompt: str, tag: str) -> str:
    """Append ``tag`` once; a prompt that already carries a variant tag is an error."""
    if VARIANT_TAG_PREFIX in user_prompt:
        raise ValueError("user prompt already carries a variant tag")
    return f"{user_prompt}\n\n{tag}"


def approx_tokens(text: str) -> int:
    return len(text.split())


# -- cache ------------------------------------------------------------------


class CacheStore:
    """Content-addressed response cache: ``{root}/{key[:2]}/{key}.json``.

    ``root=None`` keeps entries in memory only.
    """

    def __init__(self, root: Optional[os.PathLike | str] = None):
        self.root = None if root is None else Path(root)
        self._mem: dict[str, dict] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _lock(self, key: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(key, threading.Lock())

    def path(self, key: str) -> Path:
        assert self.root is not None
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> Optional[dict]:
        if key in self._mem:
            return self._mem[key]
        if self.root is None:
            return None
        p = self.path(key)
        if not p.exists():
            return None
        entry = json.loads(p.read_text(encoding="utf-8"))
        self._mem[key] = entry
        return entry

    def put(self, key: str, req: ChatRequest, resp: ChatResponse) -> None:
        entry = {
            "key": key,
            "request": {
                "model_id": req.agent.model_id,
                "system_prompt": req.system_prompt,
                "user_prompt": req.user_prompt,
            },
            "response": {"text": resp.text, "tokens_in": resp.tokens_in, "tokens_out": resp.tokens_out},
        }
        with self._lock(key):
            self._mem[key] = entry
            if self.root is None:
                return
            p = self.path(key)
            p.parent.mkdir(parents=True, exist_ok=True)
            tmp = p.with_suffix(f".tmp{threading.get_ident()}")
            tmp.write_text(json.dumps(entry, sort_keys=True, ensure_ascii=False, indent=1), encoding="utf-8")
            os.replace(tmp, p)


# -- backends ---------------------------------------------------------------


class HttpBackend:
    """OpenAI-compatible ``/v1/chat/completions`` client."""

    def __init__(self, base_url: Optional[str] = None, api_key: Optional[str] = None, timeout: float = 120.0):
        self.base_url = (base_url or os.environ.get("SCMOA_API_BASE", "")).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get("SCMOA_API_KEY", "")
        self.timeout = timeout
        if not self.base_url:
            raise BackendUnavailable("SCMOA_API_BASE is not set")

    @property
    def endpoint(self) -> str:
        if self.base_url.endswith("/v1"):
            return f"{self.base_url}/chat/completions"
        return f"{self.base_url}/v1/chat/completions"

    def __call__(self, req: ChatRequest) -> ChatResponse:
        payload = {
            "model": req.agent.model_id,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
            "temperature": req.agent.temperature,
            "max_tokens": req.agent.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            r = requests.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
        except requests.RequestException as exc:
            raise BackendUnavailable(str(exc)) from exc
        if r.status_code == 429 or r.status_code >= 500:
            raise BackendUnavailable(f"HTTP {r.status_code}")
        r.raise_for_status()
        body = r.json()
        text = body["choices"][0]["message"].get("content") or ""
        usage = body.get("usage") or {}
        return ChatResponse(
            text,
            int(usage.get("prompt_tokens", approx_tokens(req.system_prompt + " " + req.user_prompt))),
            int(usage.get("completion_tokens", approx_tokens(text))),
        )


Responder = Callable[[ChatRequest], str]


class ScriptedBackend:
    """Serves fixture responses keyed by cache key.

    ``fixtures`` maps key -> text or {"text", "tokens_in", "tokens_out"}. When a
    key is absent, ``responder`` (if given) produces the text; otherwise strict
    mode raises :class:`MissingFixture` and lenient mode returns an empty reply.
    """

    def __init__(self, fixtures: Optional[dict] = None, strict: bool = True, responder: Optional[Responder] = None):
        self.fixtures = dict(fixtures or {})
        self.strict = strict
        self.responder = responder
        self.calls = 0

    @classmethod
    def from_file(cls, path, strict: bool = True) -> "ScriptedBackend":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh), strict=strict)

    def __call__(self, req: ChatRequest) -> ChatResponse:
        self.calls += 1
        key = cache_key(req)
        entry = self.fixtures.get(key)
        if entry is None:
            if self.responder is not None:
                text = self.responder(req)
            elif self.strict:
                raise MissingFixture(f"no fixture for key {key}")
            else:
                text = ""
            entry = {"text": text}
        if isinstance(entry, str):
            entry = {"text": entry}
        text = entry["text"]
        return ChatResponse(
            text,
            int(entry.get("tokens_in", approx_tokens(req.system_prompt + " " + req.user_prompt))),
            int(entry.get("tokens_out", approx_tokens(text))),
        )


# -- client -----------------------------------------------------------------


@dataclass
class CallLog:
    """Every request/response pair that passed through a client, in call order."""

    entries: list = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add(self, req: ChatRequest, resp: ChatResponse) -> None:
        with self._lock:
            self.entries.append((req, resp))


class AgentClient:
    def __init__(
        self,
        backend: Callable[[ChatRequest], ChatResponse],
        cache: Optional[CacheStore] = None,
        max_attempts: int = MAX_ATTEMPTS,
        backoff_base: float = 0.5,
        backoff_cap: float = 30.0,
        rng: Optional[random.Random] = None,
    ):
        self.backend = backend
        self.cache = cache if cache is not None else CacheStore()
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.backoff_cap = backoff_cap
        self._rng = rng or random.Random()
        self.backend_calls = 0
        self.log = CallLog()

    def complete(self, req: ChatRequest) -> ChatResponse:
        key = cache_key(req)
        hit = self.cache.get(key)
        if hit is not None:
            r = hit["response"]
            resp = ChatResponse(r["text"], r["tokens_in"], r["tokens_out"], from_cache=True)
            self.log.add(req, resp)
            return resp
        resp = self._call_with_retry(req)
        self.cache.put(key, req, resp)
        self.log.add(req, resp)
        return resp

    def _call_with_retry(self, req: ChatRequest) -> ChatResponse:
        last: Optional[Exception] = None
        for attempt in range(self.max_attempts):
            try:
                self.backend_calls += 1
                resp = self.backend(req)
                return ChatResponse(resp.text, resp.tokens_in, resp.tokens_out, from_cache=False)
            except BackendUnavailable as exc:
                last = exc
                if attempt + 1 == self.max_attempts:
                    break
                delay = min(self.backoff_cap, self.backoff_base * 2**attempt)
                delay += self._rng.uniform(0, self.backoff_base)
                log.warning("backend unavailable (attempt %d/%d): %s", attempt + 1, self.max_attempts, exc)
                time.sleep(delay)
        raise BackendUnavailable(f"gave up after {self.max_attempts} attempts: {last}")


def make_client(
    backend: BackendKind | str,
    cache_dir=None,
    fixtures_path=None,
    strict: bool = True,
    responder: Optional[Responder] = None,
) -> AgentClient:
    backend = BackendKind(backend)
    if backend is BackendKind.SCRIPTED:
        fixtures = {}
        if fixtures_path is not None:
            with open(fixtures_path, encoding="utf-8") as fh:
                fixtures = json.load(fh)
        impl = ScriptedBackend(fixtures, strict=strict, responder=responder)
    else:
        impl = HttpBackend()
    return AgentClient(impl, CacheStore(cache_dir))
