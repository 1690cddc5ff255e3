"""Generative-model access: request types, a persistent response cache,
a chat-completions HTTP client and a scripted model for offline runs."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol

import httpx

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")
API_KEY_ENV = "PMCTS_API_KEY"


class GatewayError(Exception):
    pass


class TransportError(GatewayError):
    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class ProtocolError(GatewayError):
    pass


class ScriptMissError(GatewayError):
    pass


@dataclass(frozen=True)
class GenerationRequest:
    model_name: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    max_tokens: int = 512
    seed_tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple((r, c) for r, c in self.messages))
        if not self.messages:
            raise ValueError("messages must be non-empty")
        for role, _ in self.messages:
            if role not in ROLES:
                raise ValueError(f"unknown role {role!r}")
        if self.messages[-1][0] != "user":
            raise ValueError("last message must have role 'user'")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    @property
    def prompt(self) -> str:
        """Content of the final user message."""
        return self.messages[-1][1]

    def with_model(self, model_name: str) -> GenerationRequest:
        return GenerationRequest(
            model_name, self.messages, self.temperature, self.max_tokens, self.seed_tag
        )


@dataclass(frozen=True)
class GenerationResponse:
    content: str
    cached: bool = False
    latency_ms: int = 0


def cache_key(request: GenerationRequest) -> str:
    """SHA-256 hex digest over a canonical JSON encoding of the request."""
    payload = {
        "model": request.model_name,
        "messages": [[r, c] for r, c in request.messages],
        "temperature": float(request.temperature),
        "max_tokens": int(request.max_tokens),
        "seed_tag": request.seed_tag,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class Model(Protocol):
    name: str

    def generate(self, request: GenerationRequest) -> GenerationResponse: ...


class ResponseCache:
    """Append-only record file with an in-memory index.

    Record layout: ``<hex digest> <byte length>\\n<content bytes>\\n``.
    Corrupted records are skipped with a warning and read as misses.
    """

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self._index: dict[str, str] = {}
        self._lock = threading.Lock()
        self.corrupt_records = 0
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.path.exists():
            self._load()
        self._fh = open(self.path, "ab")

    def _load(self) -> None:
        data = self.path.read_bytes()
        pos = 0
        while pos < len(data):
            nl = data.find(b"\n", pos)
            if nl < 0:
                self._corrupt(pos, "truncated header")
                break
            header = data[pos:nl].split(b" ")
            try:
                digest = header[0].decode("ascii")
                length = int(header[1])
                if len(header) != 2 or len(digest) != 64 or length < 0:
                    raise ValueError
                int(digest, 16)
            except (ValueError, IndexError, UnicodeDecodeError):
                self._corrupt(pos, "bad header")
                pos = nl + 1
                continue
            start, end = nl + 1, nl + 1 + length
            if data[end : end + 1] != b"\n":
                self._corrupt(pos, "bad length or terminator")
                pos = nl + 1
                continue
            try:
                self._index[digest] = data[start:end].decode("utf-8")
            except UnicodeDecodeError:
                self._corrupt(pos, "undecodable content")
            pos = end + 1

    def _corrupt(self, offset: int, why: str) -> None:
        self.corrupt_records += 1
        logger.warning("skipping corrupted cache record at byte %d of %s (%s)", offset, self.path, why)

    def get(self, key: str) -> str | None:
        with self._lock:
            return self._index.get(key)

    def put(self, key: str, content: str) -> None:
        raw = content.encode("utf-8")
        with self._lock:
            if self._index.get(key) == content:
                return
            self._fh.write(f"{key} {len(raw)}\n".encode("ascii") + raw + b"\n")
            self._fh.flush()
            self._index[key] = content

    def __contains__(self, key: str) -> bool:
        return self.get(key) is not None

    def __len__(self) -> int:
        return len(self._index)

    def close(self) -> None:
        with self._lock:
            if not self._fh.closed:
                self._fh.flush()
                self._fh.close()


class CachingModel:
    """Wraps any model so identical requests hit the backend at most once."""

    def __init__(self, inner: Model, cache: ResponseCache):
        self.inner = inner
        self.cache = cache
        self.name = inner.name
        self._key_locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()
        self.backend_calls = 0

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        key = cache_key(request)
        with self._guard:
            lock = self._key_locks.setdefault(key, threading.Lock())
        with lock:
            hit = self.cache.get(key)
            if hit is not None:
                return GenerationResponse(hit, cached=True, latency_ms=0)
            resp = self.inner.generate(request)
            self.backend_calls += 1
            self.cache.put(key, resp.content)
            return GenerationResponse(resp.content, cached=False, latency_ms=resp.latency_ms)


class ChatCompletionsModel:
    """HTTP client for chat-completions-compatible endpoints.

    The credential is read from ``API_KEY_ENV`` (never logged). Transport
    failures, 429 and 5xx replies are retried with exponential backoff.
    """

    def __init__(
        self,
        endpoint: str,
        model_name: str,
        *,
        timeout: float = 60.0,
        connection_limit: int = 4,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        api_key: str | None = None,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not endpoint:
            raise ValueError("endpoint is required")
        self.endpoint = endpoint
        self.name = model_name
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(connection_limit)
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(
            timeout=timeout,
            headers=headers,
            limits=httpx.Limits(max_connections=connection_limit),
            transport=transport,
        )

    def _payload(self, request: GenerationRequest) -> dict:
        return {
            "model": request.model_name or self.name,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        payload = self._payload(request)
        last: TransportError | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                self._sleep(self.backoff_base * 2 ** (attempt - 1))
            t0 = time.monotonic()
            try:
                with self._slots:
                    resp = self._client.post(self.endpoint, json=payload)
            except httpx.HTTPError as exc:
                last = TransportError(f"request failed: {exc.__class__.__name__}")
                continue
            latency = int((time.monotonic() - t0) * 1000)
            if resp.status_code == 429 or resp.status_code >= 500:
                last = TransportError(f"backend returned {resp.status_code}", resp.status_code)
                continue
            if not 200 <= resp.status_code < 300:
                raise TransportError(f"backend returned {resp.status_code}", resp.status_code)
            return GenerationResponse(_read_content(resp), cached=False, latency_ms=latency)
        assert last is not None
        raise TransportError(
            f"{last} after {self.max_attempts} attempts", last.status
        )

    def close(self) -> None:
        self._client.close()


def _read_content(resp: httpx.Response) -> str:
    try:
        content = resp.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise ProtocolError(f"malformed response body: {exc!r}") from exc
    if not isinstance(content, str):
        raise ProtocolError("message content is not a string")
    return content


@dataclass
class ScriptEntry:
    matcher: str
    reply: str
    once: bool = False


@dataclass
class ScriptedModel:
    """Replies with the first entry whose matcher occurs in the final user
    message. ``once`` entries are consumed after their first use."""

    entries: list[ScriptEntry]
    name: str = "scripted"
    calls: int = field(default=0, init=False)

    def __post_init__(self):
        if not self.entries:
            raise ValueError("script must contain at least one entry")
        self._lock = threading.Lock()

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        prompt = request.prompt
        with self._lock:
            self.calls += 1
            for i, entry in enumerate(self.entries):
                if entry.matcher in prompt:
                    if entry.once:
                        del self.entries[i]
                    return GenerationResponse(entry.reply)
        raise ScriptMissError(f"no script entry matches prompt:\n{prompt}")


def scripted_model(
    script: Iterable[tuple[str, str] | tuple[str, str, bool] | ScriptEntry], name: str = "scripted"
) -> ScriptedModel:
    entries = []
    for item in script:
        entries.append(item if isinstance(item, ScriptEntry) else ScriptEntry(*item))
    return ScriptedModel(entries, name=name)


def load_script(path: str | os.PathLike) -> ScriptedModel:
    """Load a JSON list of ``{"match", "reply", "once"?}`` objects."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise ValueError(f"{path}: script must be a JSON list")
    entries = [ScriptEntry(e["match"], e["reply"], bool(e.get("once", False))) for e in raw]
    return ScriptedModel(entries, name=f"scripted:{Path(path).name}")


def dump_script(entries: Iterable[ScriptEntry], path: str | os.PathLike) -> None:
    data = [{"match": e.matcher, "reply": e.reply, "once": e.once} for e in entries]
    Path(path).write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
