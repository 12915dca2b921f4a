"""Provider-agnostic chat-completion transport.

HTTP body sent by :class:`HttpProvider` (POST, JSON)::

    {"model": "<model_id>",
     "messages": [{"role": "system"|"user", "content": "..."}],
     "temperature": <float>}

Accepted reply: ``choices[0].message.content`` (string) plus optional
``usage`` counters. The credential is sent as ``Authorization: Bearer``
and read from the ``AAG_API_KEY`` environment variable.
"""

from __future__ import annotations

import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import httpx

from .prompts import PromptBundle

logger = logging.getLogger(__name__)

CREDENTIAL_ENV = "AAG_API_KEY"
DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"
DEFAULT_MODEL = "gpt-4"


class LLMError(Exception):
    """Base class for transport failures."""


class AuthError(LLMError):
    pass


class BadRequest(LLMError):
    pass


class ProtocolError(LLMError):
    pass


class TransientError(LLMError):
    """Failure worth retrying."""


class Throttled(TransientError):
    pass


class ServerError(TransientError):
    pass


class Timeout(TransientError):
    pass


class RateLimited(LLMError):
    """Throttling persisted through every retry."""


@dataclass(frozen=True)
class ProviderConfig:
    endpoint: str = DEFAULT_ENDPOINT
    model_id: str = DEFAULT_MODEL
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 60.0
    max_concurrency: int = 4
    credential_env: str = CREDENTIAL_ENV
    backoff_base: float = 1.0
    backoff_cap: float = 30.0

    def __post_init__(self) -> None:
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def credential(self) -> str | None:
        return os.environ.get(self.credential_env) or None

    def __repr__(self) -> str:
        return f"ProviderConfig(endpoint={self.endpoint!r}, model_id={self.model_id!r}, temperature={self.temperature})"


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    @property
    def total(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@dataclass(frozen=True)
class ChatExchange:
    request: PromptBundle
    response: str
    usage: Usage = Usage()
    latency: float = 0.0
    attempts: int = 1


class Provider(Protocol):
    def complete(self, prompt: PromptBundle, config: ProviderConfig) -> tuple[str, Usage]:
        """Return reply text or raise an :class:`LLMError` subclass."""


class HttpProvider:
    def __init__(self, client: httpx.Client | None = None):
        self._client = client or httpx.Client()

    def complete(self, prompt: PromptBundle, config: ProviderConfig) -> tuple[str, Usage]:
        key = config.credential()
        if not key:
            raise AuthError(f"no credential in ${config.credential_env}")
        body = {"model": config.model_id, "messages": prompt.as_payload(), "temperature": config.temperature}
        try:
            resp = self._client.post(
                config.endpoint,
                json=body,
                headers={"Authorization": f"Bearer {key}"},
                timeout=config.timeout,
            )
        except httpx.TimeoutException as exc:
            raise Timeout(f"no reply within {config.timeout}s") from exc
        except httpx.TransportError as exc:
            raise ServerError(f"transport failure: {type(exc).__name__}") from exc
        status = resp.status_code
        if status in (401, 403):
            raise AuthError(f"provider rejected credential (HTTP {status})")
        if status == 429:
            raise Throttled("HTTP 429")
        if status == 408:
            raise Timeout("HTTP 408")
        if status >= 500:
            raise ServerError(f"HTTP {status}")
        if status >= 400:
            raise BadRequest(f"HTTP {status}")
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
            usage = data.get("usage") or {}
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError("unexpected response body") from exc
        if not isinstance(text, str) or not text:
            raise ProtocolError("empty completion")
        return text, Usage(int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0)))


def backoff_delays(config: ProviderConfig, rng: random.Random) -> list[float]:
    """Delay before each retry: exponential with up to +50% jitter, capped.

    Nondecreasing because ``1.5 * base * 2**i <= base * 2**(i+1)``.
    """
    out = []
    for i in range(config.max_retries):
        raw = config.backoff_base * 2**i * (1 + 0.5 * rng.random())
        out.append(min(config.backoff_cap, raw))
    return out


class ChatClient:
    """Shareable client; a semaphore bounds requests in flight."""

    def __init__(
        self,
        config: ProviderConfig,
        provider: Provider | None = None,
        sleep: Callable[[float], None] = time.sleep,
        seed: int | None = None,
    ):
        self.config = config
        self.provider = provider or HttpProvider()
        self._sleep = sleep
        self._rng = random.Random(seed)
        self._rng_lock = threading.Lock()
        self._slots = threading.BoundedSemaphore(config.max_concurrency)

    @property
    def model_id(self) -> str:
        return self.config.model_id

    def complete(self, prompt: PromptBundle) -> ChatExchange:
        with self._rng_lock:
            delays = backoff_delays(self.config, self._rng)
        attempt = 0
        while True:
            attempt += 1
            start = time.monotonic()
            try:
                with self._slots:
                    text, usage = self.provider.complete(prompt, self.config)
            except TransientError as exc:
                if attempt > self.config.max_retries:
                    if isinstance(exc, Throttled):
                        raise RateLimited(f"still throttled after {attempt} attempts") from exc
                    raise
                delay = delays[attempt - 1]
                logger.warning("attempt %d failed (%s); retrying in %.2fs", attempt, type(exc).__name__, delay)
                self._sleep(delay)
                continue
            if not text:
                raise ProtocolError("empty completion")
            return ChatExchange(prompt, text, usage, time.monotonic() - start, attempt)


def chat_complete(prompt: PromptBundle, config: ProviderConfig, provider: Provider | None = None) -> ChatExchange:
    return ChatClient(config, provider).complete(prompt)
