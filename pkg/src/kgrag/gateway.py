"""Uniform client for OpenAI-compatible chat-completion and embedding endpoints.

Adds retries with exponential backoff, a per-endpoint in-flight bound, and a
deterministic content-addressed response cache so that repeated runs replay
from disk without touching the network.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

import httpx

from .caching import DiskCache

log = logging.getLogger(__name__)

_ROLES = {"system", "user", "assistant"}


class GatewayError(Exception):
    """Base class for gateway failures."""


class RetriesExhaustedError(GatewayError):
    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


class NonRetryableHTTPError(GatewayError):
    def __init__(self, status_code: int, body_excerpt: str):
        super().__init__(f"HTTP {status_code}: {body_excerpt}")
        self.status_code = status_code
        self.body_excerpt = body_excerpt


class ResponseDecodeError(GatewayError):
    """Response body did not match the expected wire shape."""


class ProviderContractError(GatewayError):
    """Provider returned structurally inconsistent data (e.g. mixed dimensions)."""


@dataclass(frozen=True)
class EndpointConfig:
    endpoint_id: str
    base_url: str
    model: str
    credential_env: str | None = None
    max_in_flight: int = 4

    def credential(self) -> str | None:
        if not self.credential_env:
            return None
        return os.environ.get(self.credential_env)


@dataclass(frozen=True)
class ChatCall:
    endpoint_id: str
    model_name: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    max_tokens: int = 512

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        for role, _ in self.messages:
            if role not in _ROLES:
                raise ValueError(f"unknown message role: {role!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class ChatResult:
    content: str
    finish_reason: str
    prompt_tokens: int
    completion_tokens: int
    cached: bool


@dataclass(frozen=True)
class EmbeddingCall:
    model_name: str
    inputs: tuple[str, ...]
    endpoint_id: str = "embedding"

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("inputs must be non-empty")
        if any(not text.strip() for text in self.inputs):
            raise ValueError("every embedding input must be non-empty after trimming")


@dataclass(frozen=True)
class EmbeddingResult:
    vectors: tuple[tuple[float, ...], ...]
    cached: bool


def canonicalize_body(body: bytes) -> bytes:
    """Sort top-level JSON fields lexicographically; non-JSON bodies pass through."""
    try:
        obj = json.loads(body)
    except ValueError:
        return body
    if isinstance(obj, dict):
        obj = {k: obj[k] for k in sorted(obj)}
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def cache_key(endpoint_id: str, model_name: str, body: bytes) -> str:
    h = hashlib.sha256()
    h.update(endpoint_id.encode("utf-8"))
    h.update(b"\x00")
    h.update(model_name.encode("utf-8"))
    h.update(b"\x00")
    h.update(canonicalize_body(body))
    return h.hexdigest()


class LlmGateway:
    """Thread-safe facade over one or more OpenAI-compatible endpoints."""

    def __init__(
        self,
        endpoints: dict[str, EndpointConfig],
        cache: DiskCache,
        transport: httpx.BaseTransport | None = None,
        max_attempts: int = 3,
        backoff_base: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
        timeout: float = 120.0,
    ):
        self.endpoints = endpoints
        self.cache = cache
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._client = httpx.Client(transport=transport, timeout=timeout)
        self._semaphores = {
            eid: threading.BoundedSemaphore(cfg.max_in_flight)
            for eid, cfg in endpoints.items()
        }

    def endpoint(self, endpoint_id: str) -> EndpointConfig:
        try:
            return self.endpoints[endpoint_id]
        except KeyError:
            raise GatewayError(f"endpoint not configured: {endpoint_id!r}") from None

    def model_for(self, endpoint_id: str) -> str:
        return self.endpoint(endpoint_id).model

    def chat_complete(self, call: ChatCall) -> ChatResult:
        body = {
            "model": call.model_name,
            "messages": [{"role": r, "content": c} for r, c in call.messages],
            "temperature": call.temperature,
            "max_tokens": call.max_tokens,
        }
        raw, cached = self._post(call.endpoint_id, "/chat/completions", body)
        try:
            data = json.loads(raw)
            choice = data["choices"][0]
            content = choice["message"]["content"]
            finish = choice.get("finish_reason") or ""
            usage = data.get("usage") or {}
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ResponseDecodeError(f"malformed chat response: {exc}") from exc
        if not isinstance(content, str):
            raise ResponseDecodeError("chat response content is not text")
        return ChatResult(
            content=content,
            finish_reason=finish,
            prompt_tokens=int(usage.get("prompt_tokens") or 0),
            completion_tokens=int(usage.get("completion_tokens") or 0),
            cached=cached,
        )

    def embed_texts(self, call: EmbeddingCall) -> EmbeddingResult:
        body = {"model": call.model_name, "input": list(call.inputs)}
        raw, cached = self._post(call.endpoint_id, "/embeddings", body)
        try:
            data = json.loads(raw)
            items = sorted(data["data"], key=lambda d: d["index"])
            vectors = tuple(tuple(float(x) for x in d["embedding"]) for d in items)
        except (ValueError, KeyError, TypeError) as exc:
            raise ResponseDecodeError(f"malformed embeddings response: {exc}") from exc
        if len(vectors) != len(call.inputs):
            raise ProviderContractError(
                f"expected {len(call.inputs)} vectors, got {len(vectors)}"
            )
        dims = {len(v) for v in vectors}
        if len(dims) > 1 or (dims and 0 in dims):
            raise ProviderContractError(f"inconsistent embedding dimensions: {sorted(dims)}")
        return EmbeddingResult(vectors=vectors, cached=cached)

    # -- wire layer -----------------------------------------------------------

    def _post(self, endpoint_id: str, path: str, body: dict) -> tuple[bytes, bool]:
        cfg = self.endpoint(endpoint_id)
        body_bytes = json.dumps(body, ensure_ascii=False, sort_keys=True).encode("utf-8")
        key = cache_key(endpoint_id, cfg.model, body_bytes)
        hit = self.cache.get(key)
        if hit is not None:
            return hit, True

        url = cfg.base_url.rstrip("/") + path
        headers = {"Content-Type": "application/json"}
        credential = cfg.credential()
        if credential:
            headers["Authorization"] = f"Bearer {credential}"

        delay = self.backoff_base
        last_error = "transport failure"
        for attempt in range(1, self.max_attempts + 1):
            try:
                with self._semaphores[endpoint_id]:
                    resp = self._client.post(url, content=body_bytes, headers=headers)
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
            else:
                if resp.status_code == 200:
                    self.cache.put(key, body_bytes, resp.content)
                    return resp.content, False
                if resp.status_code == 429 or resp.status_code >= 500:
                    last_error = f"HTTP {resp.status_code}"
                else:
                    raise NonRetryableHTTPError(resp.status_code, resp.text[:200])
            if attempt < self.max_attempts:
                log.debug("retrying %s after %s (attempt %d)", url, last_error, attempt)
                self._sleep(delay)
                delay *= 2
        raise RetriesExhaustedError(f"{url}: {last_error}", attempts=self.max_attempts)

    def close(self) -> None:
        self._client.close()
