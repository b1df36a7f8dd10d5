"""Provider contracts for text embedding and chat completion.

Everything else in the toolkit reaches external models only through these two
interfaces. Deterministic offline implementations (a hashed-token embedder, a
scripted chat provider, a canned chat provider) make the full pipeline testable
with no network.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import threading
import time
from dataclasses import dataclass, field

import httpx

from .errors import ProviderUnavailableError, ScriptError, UsageError

EMBED_DIM = 256

INITIAL_BACKOFF_S = 0.25


@dataclass(frozen=True)
class EmbeddingVector:
    """A fixed-length, length-normalized embedding."""

    values: tuple[float, ...]

    @property
    def dimension(self) -> int:
        return len(self.values)

    @property
    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values))


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """Cosine similarity dot(u, v) / (|u| * |v|), symmetric in its arguments."""
    if u.dimension != v.dimension:
        raise UsageError(
            f"dimension mismatch: {u.dimension} vs {v.dimension}"
        )
    nu, nv = u.norm, v.norm
    if nu == 0.0 or nv == 0.0:
        raise UsageError("cosine is undefined for zero-norm vectors")
    dot = sum(a * b for a, b in zip(u.values, v.values))
    # clamp rounding overshoot so identical vectors compare exactly equal to 1
    return max(-1.0, min(1.0, dot / (nu * nv)))


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "user" | "assistant"
    text: str


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    messages: tuple[ChatMessage, ...]
    temperature: float | None = None
    max_output_tokens: int | None = None

    def validate(self) -> None:
        for i, msg in enumerate(self.messages):
            if msg.role not in ("user", "assistant"):
                raise UsageError(f"message {i}: unknown role {msg.role!r}")
            expected = "user" if i % 2 == 0 else "assistant"
            if msg.role != expected:
                raise UsageError(
                    f"message {i}: roles must alternate starting from user "
                    f"(got {msg.role!r}, expected {expected!r})"
                )

    def fingerprint(self) -> str:
        """Flat text used by the scripted provider to match script entries."""
        parts = [self.system_prompt]
        parts.extend(f"{m.role}:{m.text}" for m in self.messages)
        return "\n".join(parts)


def chat_request(system_prompt: str, user_text: str) -> ChatRequest:
    """Single-turn request helper used by the prompt-driven pipeline stages."""
    return ChatRequest(system_prompt, (ChatMessage("user", user_text),))


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "deterministic-test"  # "deterministic-test" | "remote-http"
    endpoint: str = ""
    model: str = ""
    auth_env_var: str = ""
    timeout_ms: int = 30_000
    retry_budget: int = 2

    def validate(self) -> None:
        if self.kind not in ("deterministic-test", "remote-http"):
            raise UsageError(f"unknown provider kind {self.kind!r}")
        if self.retry_budget < 0:
            raise UsageError("retry_budget must be non-negative")
        if self.kind == "remote-http" and (not self.endpoint or not self.model):
            raise UsageError("remote-http providers require endpoint and model")


def _check_texts(texts: list[str]) -> None:
    if not texts:
        raise UsageError("embed requires a non-empty list of texts")
    for i, text in enumerate(texts):
        if not text.strip():
            raise UsageError(f"text {i} is empty or whitespace-only")


class HashedTokenEmbedder:
    """Deterministic reference embedder: hashed lowercase-token counts.

    Tokens are hashed into a fixed number of buckets and the count vector is
    length-normalized. Identical sentences get cosine 1.0; sentences with
    disjoint token sets almost surely get cosine well below 1.0. Pure function
    of the input bytes, stable across processes.
    """

    def __init__(self, dimension: int = EMBED_DIM):
        self.dimension = dimension

    def _tokens(self, text: str) -> list[str]:
        tokens = [t for t in "".join(
            c if c.isalnum() else " " for c in text.lower()
        ).split() if t]
        # Texts with no alphanumeric content still need a nonzero vector.
        return tokens or [text.strip()]

    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        _check_texts(texts)
        out = []
        for text in texts:
            counts = [0.0] * self.dimension
            for token in self._tokens(text):
                digest = hashlib.sha256(token.encode("utf-8")).digest()
                bucket = int.from_bytes(digest[:8], "big") % self.dimension
                counts[bucket] += 1.0
            norm = math.sqrt(sum(v * v for v in counts))
            out.append(EmbeddingVector(tuple(v / norm for v in counts)))
        return out

    def embed_one(self, text: str) -> EmbeddingVector:
        return self.embed([text])[0]


@dataclass
class ScriptEntry:
    """One queued reply. `expect` is a substring matched against the request
    fingerprint; None matches any request."""

    response: str
    expect: str | None = None


class ScriptedChatProvider:
    """Deterministic chat fake: replies come from a queue of script entries.

    Each call consumes the first queued entry whose `expect` substring occurs in
    the request fingerprint, and fails loudly when nothing matches. All issued
    requests are recorded in `calls` so tests can assert on prompt content and
    call counts.
    """

    def __init__(self, entries: list[ScriptEntry] | None = None):
        self._entries: list[ScriptEntry] = list(entries or [])
        self._lock = threading.Lock()
        self.calls: list[ChatRequest] = []

    @classmethod
    def from_file(cls, path: str) -> "ScriptedChatProvider":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        entries = [ScriptEntry(e["response"], e.get("expect")) for e in raw]
        return cls(entries)

    def add(self, response: str, expect: str | None = None) -> None:
        with self._lock:
            self._entries.append(ScriptEntry(response, expect))

    def chat(self, request: ChatRequest) -> str:
        request.validate()
        fingerprint = request.fingerprint()
        with self._lock:
            self.calls.append(request)
            for i, entry in enumerate(self._entries):
                if entry.expect is None or entry.expect in fingerprint:
                    self._entries.pop(i)
                    return entry.response
        if not self._entries:
            raise ScriptError("chat script exhausted")
        raise ScriptError(
            "no script entry matches request fingerprint: "
            + fingerprint[:200]
        )


class CannedChatProvider:
    """Deterministic chat fake that always returns the same text."""

    def __init__(self, response: str):
        self.response = response
        self.calls: list[ChatRequest] = []
        self._lock = threading.Lock()

    def chat(self, request: ChatRequest) -> str:
        request.validate()
        with self._lock:
            self.calls.append(request)
        return self.response


class EchoUserProvider:
    """Deterministic user stand-in for offline simulation and serving.

    Reads the "- intent" bullet lines out of the system prompt's intent-list
    slot and answers with the intent closest (by the reference embedding) to
    the last assistant question. Purely a function of the request.
    """

    def __init__(self, embedder=None):
        self.embedder = embedder or HashedTokenEmbedder()
        self.calls: list[ChatRequest] = []
        self._lock = threading.Lock()

    def chat(self, request: ChatRequest) -> str:
        request.validate()
        with self._lock:
            self.calls.append(request)
        intents = [
            line[2:].strip()
            for line in request.system_prompt.splitlines()
            if line.startswith("- ") and line[2:].strip()
        ]
        question = ""
        for msg in reversed(request.messages):
            if msg.role == "assistant":
                question = msg.text
                break
        if not intents:
            return "Please proceed however you think is best."
        if not question:
            return intents[0]
        q_vec = self.embedder.embed_one(question)
        vectors = self.embedder.embed(intents)
        scores = [cosine(q_vec, v) for v in vectors]
        return intents[scores.index(max(scores))]


class _RemoteBase:
    def __init__(self, config: ProviderConfig, transport=None):
        config.validate()
        if config.kind != "remote-http":
            raise UsageError("remote provider requires kind remote-http")
        self.config = config
        self._client = httpx.Client(
            timeout=config.timeout_ms / 1000.0, transport=transport
        )

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.config.auth_env_var:
            token = os.environ.get(self.config.auth_env_var, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def _post(self, body: dict) -> dict:
        attempts = 0
        backoff = INITIAL_BACKOFF_S
        last_error: Exception | None = None
        while attempts <= self.config.retry_budget:
            attempts += 1
            try:
                resp = self._client.post(
                    self.config.endpoint, json=body, headers=self._headers()
                )
                resp.raise_for_status()
                return resp.json()
            except (httpx.HTTPError, ValueError) as exc:
                last_error = exc
                if attempts <= self.config.retry_budget:
                    time.sleep(backoff)
                    backoff *= 2
        raise ProviderUnavailableError(
            f"remote provider failed after {attempts} attempts: {last_error}",
            attempts=attempts,
        )


class RemoteEmbeddingProvider(_RemoteBase):
    """Minimal JSON-over-HTTP embedding client: POST {"model", "input": [...]}
    expecting {"embeddings": [[...], ...]}. Vectors are re-normalized locally."""

    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        _check_texts(texts)
        data = self._post({"model": self.config.model, "input": texts})
        vectors = []
        for raw in data["embeddings"]:
            norm = math.sqrt(sum(v * v for v in raw))
            if norm == 0.0:
                raise ProviderUnavailableError(
                    "remote embedding returned a zero vector", attempts=1
                )
            vectors.append(EmbeddingVector(tuple(v / norm for v in raw)))
        if len(vectors) != len(texts):
            raise ProviderUnavailableError(
                f"remote embedding returned {len(vectors)} vectors "
                f"for {len(texts)} inputs",
                attempts=1,
            )
        return vectors

    def embed_one(self, text: str) -> EmbeddingVector:
        return self.embed([text])[0]


class RemoteChatProvider(_RemoteBase):
    """Minimal JSON-over-HTTP chat client: POST {"model", "system",
    "messages": [{"role", "text"}]} expecting {"text": ...}."""

    def chat(self, request: ChatRequest) -> str:
        request.validate()
        body = {
            "model": self.config.model,
            "system": request.system_prompt,
            "messages": [
                {"role": m.role, "text": m.text} for m in request.messages
            ],
        }
        if request.temperature is not None:
            body["temperature"] = request.temperature
        if request.max_output_tokens is not None:
            body["max_output_tokens"] = request.max_output_tokens
        data = self._post(body)
        return data["text"]


def make_embedder(config: ProviderConfig):
    if config.kind == "deterministic-test":
        return HashedTokenEmbedder()
    return RemoteEmbeddingProvider(config)
