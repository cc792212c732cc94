"""Provider gateway: send a resolved prompt to an LLM, get text back.

Two provider kinds: an OpenAI-compatible HTTP client (chat-completions
wire shape, bearer token from an environment variable named by
``api_key_ref``) and a deterministic mock for hermetic tests. The prompt
goes out as a single zero-shot user message; transient failures (connect
errors, timeouts, HTTP 429/5xx) are retried with exponential backoff and
full jitter; auth failures are never retried. The transport is injectable
so every retry and timeout path can be exercised without a network.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import queue
import random
import threading
import time
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol
from urllib.parse import urlparse

import httpx

from .templates import MAX_TEXT_BYTES, ResolvedPrompt

logger = logging.getLogger(__name__)

PROVIDER_MOCK = "mock"
PROVIDER_OPENAI_COMPATIBLE = "openai_compatible"

E_AUTH = "E_AUTH"
E_TIMEOUT = "E_TIMEOUT"
E_RATE_LIMITED = "E_RATE_LIMITED"
E_PROVIDER = "E_PROVIDER"
E_CONFIG = "E_CONFIG"

#: Retry backoff: base delay doubles per attempt, actual sleep is uniformly
#: jittered between zero and the cap.
BACKOFF_BASE_SECONDS = 0.5
BACKOFF_FACTOR = 2.0

MOCK_TRUNCATE_BYTES = 2000

_LOCAL_HOSTS = {"localhost", "127.0.0.1", "::1"}


class GatewayError(Exception):
    """Completion failure; ``kind`` is the machine-readable error code."""

    def __init__(self, kind: str, message: str, *, attempts: int = 0):
        super().__init__(f"{kind}: {message}")
        self.kind = kind
        self.message = message
        self.attempts = attempts


@dataclass(frozen=True)
class ProviderConfig:
    """How to reach a provider. Holds the *name* of the API key environment
    variable, never the secret itself."""

    kind: str = PROVIDER_MOCK
    model: str = "mock-model"
    base_url: str = ""
    api_key_ref: str = "PROVIDER_API_KEY"
    timeout: float = 30.0
    max_attempts: int = 3
    max_output_tokens: int = 512
    temperature: float = 0.7
    completions_path: str = "/v1/chat/completions"

    def __post_init__(self) -> None:
        if self.kind not in (PROVIDER_MOCK, PROVIDER_OPENAI_COMPATIBLE):
            raise ValueError(f"unknown provider kind: {self.kind!r}")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.kind == PROVIDER_OPENAI_COMPATIBLE:
            parsed = urlparse(self.base_url)
            if parsed.scheme not in ("http", "https") or not parsed.hostname:
                raise ValueError(f"base_url must be an http(s) URL, got {self.base_url!r}")
            if parsed.scheme == "http" and parsed.hostname not in _LOCAL_HOSTS:
                raise ValueError("non-localhost providers must use https")


@dataclass(frozen=True)
class ProviderInfo:
    kind: str
    model: str


@dataclass(frozen=True)
class CompletionResult:
    text: str
    attempts: int
    latency: float
    provider: ProviderInfo


@dataclass(frozen=True)
class TransportRequest:
    url: str
    headers: Mapping[str, str]
    body: bytes
    timeout: float


@dataclass(frozen=True)
class TransportReply:
    status: int
    body: bytes


class TransportError(Exception):
    """Connection-level failure (DNS, refused, reset); treated as transient."""


class TransportTimeout(TransportError):
    """The attempt exceeded its deadline; treated as transient."""


class Transport(Protocol):
    def send(self, request: TransportRequest) -> TransportReply: ...


class HttpxTransport:
    """Real HTTP transport on httpx; translates its errors to gateway ones."""

    def __init__(self, client: httpx.Client | None = None):
        self._client = client or httpx.Client()

    def send(self, request: TransportRequest) -> TransportReply:
        try:
            response = self._client.post(
                request.url,
                content=request.body,
                headers=dict(request.headers),
                timeout=request.timeout,
            )
        except httpx.TimeoutException as exc:
            raise TransportTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        return TransportReply(status=response.status_code, body=response.content)


def backoff_cap(attempt: int) -> float:
    """Pre-jitter delay cap before the next attempt; nondecreasing in attempt."""
    return BACKOFF_BASE_SECONDS * BACKOFF_FACTOR ** (attempt - 1)


def _run_with_deadline(
    transport: Transport, request: TransportRequest, deadline: float
) -> TransportReply:
    """Run one send on a worker thread and give up after ``deadline`` seconds,
    even if the transport itself never returns."""
    outcome: queue.Queue = queue.Queue(maxsize=1)

    def work() -> None:
        try:
            outcome.put(("ok", transport.send(request)))
        except BaseException as exc:  # delivered to the caller below
            outcome.put(("err", exc))

    worker = threading.Thread(target=work, daemon=True, name="gateway-attempt")
    worker.start()
    try:
        status, payload = outcome.get(timeout=deadline)
    except queue.Empty:
        raise TransportTimeout(f"no response within {deadline:g}s") from None
    if status == "err":
        raise payload
    return payload


def _extract_completion_text(body: bytes) -> str:
    try:
        data = json.loads(body.decode("utf-8"))
        text = data["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise GatewayError(E_PROVIDER, f"malformed provider response: {exc}") from exc
    if not isinstance(text, str):
        raise GatewayError(E_PROVIDER, "provider returned non-string message content")
    return text


def mock_complete(prompt: ResolvedPrompt, *, model: str = "mock-model") -> CompletionResult:
    """Deterministic stand-in provider: pure function of the prompt text.

    Returns ``MOCK[<first 8 hex of sha256>]:<prompt truncated to 2000 bytes>``
    with attempts=1 and zero latency.
    """
    raw = prompt.text.encode("utf-8")
    digest = hashlib.sha256(raw).hexdigest()[:8]
    truncated = raw[:MOCK_TRUNCATE_BYTES].decode("utf-8", errors="ignore")
    return CompletionResult(
        text=f"MOCK[{digest}]:{truncated}",
        attempts=1,
        latency=0.0,
        provider=ProviderInfo(PROVIDER_MOCK, model),
    )


def complete(
    config: ProviderConfig,
    prompt: ResolvedPrompt,
    *,
    transport: Transport | None = None,
    sleep: Callable[[float], None] | None = None,
) -> CompletionResult:
    """Send the prompt and return the provider's text.

    The prompt bytes are sent untouched as one user message. Raises
    GatewayError with kind E_CONFIG, E_AUTH, E_TIMEOUT, E_RATE_LIMITED, or
    E_PROVIDER; only transient failures consume retry attempts.
    """
    if not prompt.text:
        raise ValueError("prompt text must be nonempty")
    if config.kind == PROVIDER_MOCK:
        return mock_complete(prompt, model=config.model)

    api_key = os.environ.get(config.api_key_ref)
    if not api_key:
        raise GatewayError(
            E_CONFIG, f"environment variable {config.api_key_ref!r} is not set"
        )

    body = json.dumps(
        {
            "model": config.model,
            "messages": [{"role": "user", "content": prompt.text}],
            "max_tokens": config.max_output_tokens,
            "temperature": config.temperature,
        }
    ).encode("utf-8")
    if len(body) > MAX_TEXT_BYTES:
        raise GatewayError(E_PROVIDER, "request body exceeds 1 MiB")

    request = TransportRequest(
        url=config.base_url.rstrip("/") + config.completions_path,
        headers={
            "authorization": f"Bearer {api_key}",
            "content-type": "application/json",
        },
        body=body,
        timeout=config.timeout,
    )
    if transport is None:
        transport = HttpxTransport()
    if sleep is None:
        sleep = time.sleep

    last_failure = (E_PROVIDER, "no attempt made")
    for attempt in range(1, config.max_attempts + 1):
        started = time.monotonic()
        try:
            reply = _run_with_deadline(transport, request, config.timeout)
        except TransportTimeout:
            last_failure = (E_TIMEOUT, f"attempt {attempt} exceeded {config.timeout:g}s deadline")
            logger.warning("completion attempt %d/%d timed out", attempt, config.max_attempts)
        except TransportError as exc:
            last_failure = (E_PROVIDER, f"attempt {attempt} failed to connect: {exc}")
            logger.warning(
                "completion attempt %d/%d failed to connect", attempt, config.max_attempts
            )
        else:
            latency = time.monotonic() - started
            if reply.status in (401, 403):
                raise GatewayError(
                    E_AUTH,
                    f"provider rejected credentials (HTTP {reply.status})",
                    attempts=attempt,
                )
            if reply.status == 429:
                last_failure = (E_RATE_LIMITED, f"rate limited (HTTP 429) on attempt {attempt}")
                logger.warning("completion attempt %d/%d rate limited", attempt, config.max_attempts)
            elif reply.status >= 500:
                last_failure = (
                    E_PROVIDER,
                    f"provider error (HTTP {reply.status}) on attempt {attempt}",
                )
                logger.warning(
                    "completion attempt %d/%d got HTTP %d",
                    attempt,
                    config.max_attempts,
                    reply.status,
                )
            elif reply.status != 200:
                raise GatewayError(
                    E_PROVIDER,
                    f"unexpected provider response (HTTP {reply.status})",
                    attempts=attempt,
                )
            else:
                if len(reply.body) > MAX_TEXT_BYTES:
                    raise GatewayError(
                        E_PROVIDER, "response body exceeds 1 MiB", attempts=attempt
                    )
                try:
                    text = _extract_completion_text(reply.body)
                except GatewayError as exc:
                    raise GatewayError(exc.kind, exc.message, attempts=attempt) from exc
                return CompletionResult(
                    text=text,
                    attempts=attempt,
                    latency=latency,
                    provider=ProviderInfo(config.kind, config.model),
                )
        if attempt < config.max_attempts:
            sleep(random.uniform(0.0, backoff_cap(attempt)))

    kind, message = last_failure
    raise GatewayError(
        kind,
        f"{message} (gave up after {config.max_attempts} attempts)",
        attempts=config.max_attempts,
    )
