"""Chat-completion and embedding backends.

One internal contract (ChatRequest in, ChatResponse out, schema-validated),
four ways to satisfy it: a live chat-completions-style HTTP adapter, a
recording wrapper, a cassette replayer, and scripted/canned doubles for
offline work. Cassettes are JSON Lines keyed by a content hash of the
request, so prompt-preserving refactors keep them valid.
"""

from __future__ import annotations

import abc
import hashlib
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence, TypeVar

import jsonschema
import numpy as np
import requests

logger = logging.getLogger(__name__)

#: When set, constructing a live HTTP backend without an injected session fails.
DISABLE_NETWORK_ENV = "ONTOEKG_DISABLE_NETWORK"


class BackendError(Exception):
    """Unrecoverable backend failure."""


class AuthError(BackendError):
    pass


class RateLimitedError(BackendError):
    pass


class CassetteMissError(BackendError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"no cassette entry for request hash {key}")


class SchemaFailureError(Exception):
    """Structured-output validation still failing after all repair retries."""


@dataclass(frozen=True)
class ChatRequest:
    model: str
    system_prompt: str
    user_content: str
    response_schema: Mapping[str, Any]
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if not self.model:
            raise ValueError("model must be non-empty")
        if not self.user_content:
            raise ValueError("user_content must be non-empty")


@dataclass
class ChatResponse:
    content: str
    parsed: Any = None
    usage: dict[str, int] = field(default_factory=dict)
    schema_error: str | None = None


def request_key(req: ChatRequest) -> str:
    """Stable content hash over the semantically relevant request fields."""
    payload = json.dumps(
        [req.model, req.system_prompt, req.user_content, req.response_schema],
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def embedding_key(model: str, text: str) -> str:
    return hashlib.sha256(f"{model}\x00{text}".encode("utf-8")).hexdigest()


def _validated_response(content: str, schema: Mapping[str, Any], usage: dict[str, int]) -> ChatResponse:
    try:
        data = json.loads(content)
    except json.JSONDecodeError as exc:
        return ChatResponse(content, None, usage, f"response is not valid JSON: {exc}")
    try:
        jsonschema.validate(data, dict(schema))
    except jsonschema.ValidationError as exc:
        return ChatResponse(content, None, usage, f"response violates schema: {exc.message}")
    return ChatResponse(content, data, usage)


class LlmBackend(abc.ABC):
    mode: str = "abstract"

    @abc.abstractmethod
    def complete(self, req: ChatRequest) -> ChatResponse:
        """Run one chat request; parsed is set iff content matches the schema."""


class EmbeddingBackend(abc.ABC):
    mode: str = "abstract"
    model: str = "unknown"

    @abc.abstractmethod
    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        """One L2-normalized vector per input text."""


def _unit(vector: np.ndarray) -> np.ndarray:
    vector = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        raise BackendError("embedding backend returned a zero vector")
    return vector / norm


class Cassette:
    """JSON Lines store of chat and embedding exchanges, shared by wrappers.

    Chat entries are looked up by request hash; entries sharing a key are
    consumed in file order. A sequential mode ignores keys entirely for
    callers whose prompts are not stable.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._chat: dict[str, list[dict]] = {}
        self._chat_cursor: dict[str, int] = {}
        self._sequence: list[dict] = []
        self._sequence_cursor = 0
        self._embeddings: dict[str, list[float]] = {}

    @classmethod
    def for_replay(cls, path: str | Path) -> "Cassette":
        cassette = cls(path)
        cassette.load()
        return cassette

    @classmethod
    def for_record(cls, path: str | Path) -> "Cassette":
        cassette = cls(path)
        cassette.path.parent.mkdir(parents=True, exist_ok=True)
        cassette.path.write_text("", encoding="utf-8")
        return cassette

    def load(self) -> None:
        if not self.path.is_file():
            raise FileNotFoundError(f"cassette not found: {self.path}")
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            entry = json.loads(line)
            if entry.get("kind") == "chat":
                self._chat.setdefault(entry["key"], []).append(entry)
                self._sequence.append(entry)
            elif entry.get("kind") == "embedding":
                self._embeddings[entry["key"]] = entry["vector"]

    def _append(self, entry: dict) -> None:
        with self._lock:
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(entry, sort_keys=True, ensure_ascii=True) + "\n")

    def record_chat(self, req: ChatRequest, resp: ChatResponse) -> None:
        self._append(
            {
                "kind": "chat",
                "key": request_key(req),
                "request": {
                    "model": req.model,
                    "system_prompt": req.system_prompt,
                    "user_content": req.user_content,
                },
                "response": {"content": resp.content, "usage": resp.usage},
            }
        )

    def record_embedding(self, model: str, text: str, vector: Sequence[float]) -> None:
        self._append(
            {
                "kind": "embedding",
                "key": embedding_key(model, text),
                "text": text,
                "vector": [float(x) for x in vector],
            }
        )

    def replay_chat(self, key: str) -> dict | None:
        with self._lock:
            entries = self._chat.get(key)
            if not entries:
                return None
            cursor = self._chat_cursor.get(key, 0)
            entry = entries[min(cursor, len(entries) - 1)]
            self._chat_cursor[key] = cursor + 1
            return entry

    def replay_chat_sequential(self) -> dict | None:
        with self._lock:
            if self._sequence_cursor >= len(self._sequence):
                return None
            entry = self._sequence[self._sequence_cursor]
            self._sequence_cursor += 1
            return entry

    def replay_embedding(self, key: str) -> list[float] | None:
        return self._embeddings.get(key)


class HttpChatBackend(LlmBackend):
    """Adapter for chat-completions-style HTTP APIs (OpenAI wire format)."""

    mode = "live"

    def __init__(
        self,
        base_url: str,
        api_key_env: str,
        timeout: float = 120.0,
        max_attempts: int = 3,
        backoff_base: float = 1.0,
        session: requests.Session | None = None,
    ):
        if session is None:
            if os.environ.get(DISABLE_NETWORK_ENV):
                raise BackendError(
                    f"live network access is disabled ({DISABLE_NETWORK_ENV} is set)"
                )
            session = requests.Session()
        self._session = session
        self._base_url = base_url.rstrip("/")
        self._api_key_env = api_key_env
        self._timeout = timeout
        self._max_attempts = max_attempts
        self._backoff_base = backoff_base

    def _api_key(self) -> str:
        key = os.environ.get(self._api_key_env)
        if not key:
            raise AuthError(f"API key environment variable not set: {self._api_key_env}")
        return key

    def complete(self, req: ChatRequest) -> ChatResponse:
        payload = {
            "model": req.model,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_content},
            ],
            "temperature": req.temperature,
            "response_format": {"type": "json_object"},
        }
        headers = {"Authorization": f"Bearer {self._api_key()}"}
        url = f"{self._base_url}/chat/completions"

        last_error: Exception | None = None
        for attempt in range(self._max_attempts):
            if attempt:
                delay = self._backoff_base * (2 ** (attempt - 1))
                time.sleep(delay + random.uniform(0, self._backoff_base / 2))
            try:
                response = self._session.post(url, json=payload, headers=headers, timeout=self._timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code in (401, 403):
                raise AuthError(f"authentication rejected (HTTP {response.status_code})")
            if response.status_code == 429:
                last_error = RateLimitedError("rate limited (HTTP 429)")
                continue
            if response.status_code >= 500:
                last_error = BackendError(f"server error (HTTP {response.status_code})")
                continue
            if response.status_code != 200:
                raise BackendError(f"unexpected HTTP status {response.status_code}: {response.text[:200]}")
            data = response.json()
            content = data["choices"][0]["message"]["content"]
            usage = {k: int(v) for k, v in data.get("usage", {}).items() if isinstance(v, int)}
            return _validated_response(content, req.response_schema, usage)

        if isinstance(last_error, RateLimitedError):
            raise last_error
        raise BackendError(f"request failed after {self._max_attempts} attempts: {last_error}")


class RecordingChatBackend(LlmBackend):
    mode = "record"

    def __init__(self, inner: LlmBackend, cassette: Cassette):
        self._inner = inner
        self._cassette = cassette

    def complete(self, req: ChatRequest) -> ChatResponse:
        resp = self._inner.complete(req)
        self._cassette.record_chat(req, resp)
        return resp


class ReplayChatBackend(LlmBackend):
    mode = "replay"

    def __init__(self, cassette: Cassette, sequential: bool = False):
        self._cassette = cassette
        self._sequential = sequential

    def complete(self, req: ChatRequest) -> ChatResponse:
        if self._sequential:
            entry = self._cassette.replay_chat_sequential()
            if entry is None:
                raise CassetteMissError(request_key(req))
        else:
            key = request_key(req)
            entry = self._cassette.replay_chat(key)
            if entry is None:
                raise CassetteMissError(key)
        stored = entry["response"]
        return _validated_response(stored["content"], req.response_schema, dict(stored.get("usage", {})))


class ScriptedChatBackend(LlmBackend):
    """Returns queued raw responses in FIFO order; used for tests."""

    mode = "mock"

    def __init__(self, responses: Sequence[str]):
        self._queue = list(responses)
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()

    def complete(self, req: ChatRequest) -> ChatResponse:
        with self._lock:
            self.requests.append(req)
            if not self._queue:
                raise BackendError("scripted backend has no responses left")
            content = self._queue.pop(0)
        return _validated_response(content, req.response_schema, {})


class CannedChatBackend(LlmBackend):
    """Schema-shaped empty answers; the offline `mock` mode of the CLI."""

    mode = "mock"

    def complete(self, req: ChatRequest) -> ChatResponse:
        properties = dict(req.response_schema).get("properties", {})
        instance: dict[str, Any] = {}
        for name, spec in properties.items():
            kind = spec.get("type")
            if kind == "array":
                instance[name] = []
            elif kind == "boolean":
                instance[name] = False
            elif kind == "string":
                instance[name] = ""
            elif kind in ("number", "integer"):
                instance[name] = 0
            else:
                instance[name] = None
        return _validated_response(json.dumps(instance), req.response_schema, {})


class HashEmbedder(EmbeddingBackend):
    """Deterministic pseudo-random unit vectors seeded by the text content.

    Equal strings map to equal vectors; distinct strings land nearly
    orthogonal with overwhelming probability at dimension 64.
    """

    mode = "mock"
    model = "hash-embedder-64"

    def __init__(self, dim: int = 64):
        self._dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("texts must be non-empty")
        out = []
        for text in texts:
            if text not in self._cache:
                seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
                rng = np.random.default_rng(seed)
                self._cache[text] = _unit(rng.standard_normal(self._dim))
            out.append(self._cache[text])
        return out


class IdentityEmbedder(EmbeddingBackend):
    """One-hot vectors over the distinct texts of a single call.

    Equal strings get identical vectors, distinct strings orthogonal ones,
    which makes fuzzy matching collapse to exact matching. Vectors from
    different calls are not comparable; embed everything in one call.
    """

    mode = "mock"
    model = "identity-embedder"

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("texts must be non-empty")
        distinct = sorted(set(texts))
        index = {text: i for i, text in enumerate(distinct)}
        dim = len(distinct)
        out = []
        for text in texts:
            v = np.zeros(dim, dtype=np.float64)
            v[index[text]] = 1.0
            out.append(v)
        return out


class ScriptedEmbedder(EmbeddingBackend):
    """Hand-set vectors per text; unknown texts are an error."""

    mode = "mock"
    model = "scripted-embedder"

    def __init__(self, vectors: Mapping[str, Sequence[float]]):
        self._vectors = {k: _unit(np.asarray(v, dtype=np.float64)) for k, v in vectors.items()}

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("texts must be non-empty")
        try:
            return [self._vectors[t] for t in texts]
        except KeyError as exc:
            raise BackendError(f"no scripted vector for text {exc.args[0]!r}") from exc


class HttpEmbeddingBackend(EmbeddingBackend):
    mode = "live"

    def __init__(
        self,
        model: str,
        base_url: str,
        api_key_env: str,
        batch_size: int = 64,
        timeout: float = 120.0,
        session: requests.Session | None = None,
    ):
        if session is None:
            if os.environ.get(DISABLE_NETWORK_ENV):
                raise BackendError(
                    f"live network access is disabled ({DISABLE_NETWORK_ENV} is set)"
                )
            session = requests.Session()
        self.model = model
        self._session = session
        self._base_url = base_url.rstrip("/")
        self._api_key_env = api_key_env
        self._batch_size = batch_size
        self._timeout = timeout
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("texts must be non-empty")
        key = os.environ.get(self._api_key_env)
        if not key:
            raise AuthError(f"API key environment variable not set: {self._api_key_env}")
        missing = [t for t in dict.fromkeys(texts) if t not in self._cache]
        for start in range(0, len(missing), self._batch_size):
            batch = missing[start : start + self._batch_size]
            response = self._session.post(
                f"{self._base_url}/embeddings",
                json={"model": self.model, "input": batch},
                headers={"Authorization": f"Bearer {key}"},
                timeout=self._timeout,
            )
            if response.status_code in (401, 403):
                raise AuthError(f"authentication rejected (HTTP {response.status_code})")
            if response.status_code != 200:
                raise BackendError(f"embedding request failed (HTTP {response.status_code})")
            rows = response.json()["data"]
            if len(rows) != len(batch):
                raise BackendError("embedding response size does not match the batch")
            vectors = [np.asarray(row["embedding"], dtype=np.float64) for row in rows]
            dims = {v.shape for v in vectors}
            if len(dims) > 1:
                raise BackendError(f"dimension mismatch across a batch: {sorted(dims)}")
            for text, vector in zip(batch, vectors):
                self._cache[text] = _unit(vector)
        return [self._cache[t] for t in texts]


class RecordingEmbeddingBackend(EmbeddingBackend):
    mode = "record"

    def __init__(self, inner: EmbeddingBackend, cassette: Cassette):
        self._inner = inner
        self._cassette = cassette
        self.model = inner.model
        self._recorded: set[str] = set()

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        vectors = self._inner.embed(texts)
        for text, vector in zip(texts, vectors):
            if text not in self._recorded:
                self._cassette.record_embedding(self.model, text, vector.tolist())
                self._recorded.add(text)
        return vectors


class ReplayEmbeddingBackend(EmbeddingBackend):
    mode = "replay"

    def __init__(self, cassette: Cassette, model: str):
        self._cassette = cassette
        self.model = model
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("texts must be non-empty")
        out = []
        for text in texts:
            if text not in self._cache:
                key = embedding_key(self.model, text)
                stored = self._cassette.replay_embedding(key)
                if stored is None:
                    raise CassetteMissError(key)
                self._cache[text] = _unit(np.asarray(stored, dtype=np.float64))
            out.append(self._cache[text])
        return out


T = TypeVar("T")

_REPAIR_TEMPLATE = (
    "{task}\n\n"
    "Your previous reply could not be used.\n"
    "Previous reply:\n{raw}\n\n"
    "Problem: {error}\n"
    "Reply again with JSON that satisfies the required schema exactly."
)


def request_validated(
    backend: LlmBackend,
    req: ChatRequest,
    parse: Callable[[Any], T],
    max_retries: int = 2,
) -> tuple[T, int]:
    """Run a request with schema repair retries.

    Each retry carries the previous raw reply and the validation error back
    to the model. Returns (parsed value, retries used); raises
    SchemaFailureError when retries are exhausted.
    """
    current = req
    error = "no response"
    for attempt in range(max_retries + 1):
        response = backend.complete(current)
        if response.parsed is not None:
            try:
                return parse(response.parsed), attempt
            except ValueError as exc:
                error = str(exc)
        else:
            error = response.schema_error or "response did not validate"
        if attempt < max_retries:
            logger.info("schema repair retry %d: %s", attempt + 1, error.splitlines()[0])
            current = replace(
                req,
                user_content=_REPAIR_TEMPLATE.format(
                    task=req.user_content, raw=response.content, error=error
                ),
            )
    raise SchemaFailureError(f"structured output failed after {max_retries} retries: {error}")


def make_chat_backend(cfg, mode: str, cassette: Cassette | None) -> LlmBackend:
    """Wire a chat backend from config and the CLI --llm-mode flag."""
    if mode == "mock":
        return CannedChatBackend()
    if mode == "replay":
        if cassette is None:
            raise BackendError("replay mode needs a cassette")
        return ReplayChatBackend(cassette)
    base_url = cfg.llm_base_url or os.environ.get("ONTOEKG_LLM_BASE_URL") or "https://api.openai.com/v1"
    live = HttpChatBackend(base_url=base_url, api_key_env=cfg.llm_api_key_env)
    if mode == "live":
        return live
    if mode == "record":
        if cassette is None:
            raise BackendError("record mode needs a cassette")
        return RecordingChatBackend(live, cassette)
    raise BackendError(f"unknown llm mode: {mode}")


def make_embedding_backend(cfg, mode: str, cassette: Cassette | None) -> EmbeddingBackend:
    if mode == "mock":
        return HashEmbedder()
    if mode == "replay":
        if cassette is None:
            raise BackendError("replay mode needs a cassette")
        return ReplayEmbeddingBackend(cassette, cfg.embedding_model)
    base_url = (
        cfg.embedding_base_url
        or os.environ.get("ONTOEKG_EMBEDDING_BASE_URL")
        or "https://api.openai.com/v1"
    )
    live = HttpEmbeddingBackend(
        model=cfg.embedding_model,
        base_url=base_url,
        api_key_env=cfg.embedding_api_key_env,
        batch_size=cfg.embedding_batch_size,
    )
    if mode == "live":
        return live
    if mode == "record":
        if cassette is None:
            raise BackendError("record mode needs a cassette")
        return RecordingEmbeddingBackend(live, cassette)
    raise BackendError(f"unknown llm mode: {mode}")
