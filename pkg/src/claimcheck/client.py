"""Completion backends: decoding defaults, retries, rate limiting, and
bounded-concurrency batch execution, plus a deterministic mock for tests.

The batch executor is the only concurrent part of the package; everything it
calls is pure, so results are reproducible for any parallelism.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import requests

from .core import ClaimCheckError

DEFAULT_TEMPERATURE = 1.0
DEFAULT_TOP_P = 0.95
DEFAULT_TOP_K = 64
DEFAULT_MAX_NEW_TOKENS = 378
DEFAULT_PROMPT_TOKEN_CEILING = 4306


class InvalidParams(ClaimCheckError):
    """Decoding or batch parameters out of range."""


class PromptTooLong(ClaimCheckError):
    """Prompt exceeds the configured token ceiling; rejected before dispatch."""


class TransientBackendError(ClaimCheckError):
    """Retryable backend failure (rate limit, 5xx, timeout)."""


class BackendExhausted(ClaimCheckError):
    """Backend failed permanently or retries ran out."""


class ConfigError(ClaimCheckError):
    """Backend configuration missing or invalid."""


@dataclass(frozen=True)
class DecodingParams:
    """Sampling settings sent with every completion request."""

    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    top_k: int = DEFAULT_TOP_K
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise InvalidParams(f"temperature must be >= 0, got {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise InvalidParams(f"top_p must be in (0, 1], got {self.top_p}")
        if self.top_k < 1:
            raise InvalidParams(f"top_k must be >= 1, got {self.top_k}")
        if self.max_new_tokens < 1:
            raise InvalidParams(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")

    def as_dict(self) -> dict:
        return {
            "temperature": self.temperature,
            "top_p": self.top_p,
            "top_k": self.top_k,
            "max_new_tokens": self.max_new_tokens,
        }


@dataclass(frozen=True)
class CompletionRequest:
    request_id: str
    prompt: str
    params: DecodingParams = field(default_factory=DecodingParams)


@dataclass(frozen=True)
class CompletionResult:
    request_id: str
    text: str
    latency_s: float
    attempts: int


class Tokenizer(Protocol):
    def tokenize(self, text: str) -> list[str]: ...

    def count(self, text: str) -> int: ...


class WhitespaceTokenizer:
    """Counts whitespace-separated tokens. Test default; production callers
    should wrap the target model's real tokenizer."""

    name = "whitespace"

    def tokenize(self, text: str) -> list[str]:
        return text.split()

    def count(self, text: str) -> int:
        return len(text.split())


class WordPunctTokenizer:
    """Splits words and punctuation separately, closer to subword granularity."""

    name = "wordpunct"

    _token_re = re.compile(r"\w+|[^\w\s]")

    def tokenize(self, text: str) -> list[str]:
        return self._token_re.findall(text)

    def count(self, text: str) -> int:
        return len(self._token_re.findall(text))


def tokenizer_by_name(name: str) -> Tokenizer:
    if name == "whitespace":
        return WhitespaceTokenizer()
    if name == "wordpunct":
        return WordPunctTokenizer()
    raise ConfigError(f"unknown tokenizer {name!r}")


class Backend(Protocol):
    """Anything that turns a prompt into completion text."""

    def generate(self, prompt: str, params: DecodingParams) -> str: ...


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class MockBackend:
    """Deterministic backend keyed by prompt digest.

    ``table`` maps prompt digests to canned completions; ``fail_digests``
    always raise a transient error (so retries exhaust); ``fail_first`` makes
    the first N generate() calls fail transiently, for retry accounting tests.
    Unknown prompts fall back to ``default`` when given.
    """

    def __init__(
        self,
        table: dict[str, str] | None = None,
        default: str | None = None,
        fail_digests: set[str] | None = None,
        fail_first: int = 0,
    ) -> None:
        self.table = dict(table or {})
        self.default = default
        self.fail_digests = set(fail_digests or ())
        self.fail_first = fail_first
        self.last_params: DecodingParams | None = None
        self._calls = 0
        self._lock = threading.Lock()

    def generate(self, prompt: str, params: DecodingParams) -> str:
        with self._lock:
            self._calls += 1
            calls = self._calls
            self.last_params = params
        if calls <= self.fail_first:
            raise TransientBackendError("scripted transient failure")
        digest = prompt_digest(prompt)
        if digest in self.fail_digests:
            raise TransientBackendError("scripted per-prompt failure")
        if digest in self.table:
            return self.table[digest]
        if self.default is not None:
            return self.default
        raise BackendExhausted("mock backend has no completion for this prompt")


@dataclass(frozen=True)
class BackendConfig:
    """HTTP backend settings; the API key is read from ``api_key_env``."""

    base_url: str
    model: str
    api_key_env: str = "CLAIMCHECK_API_KEY"
    requests_per_second: float | None = None
    max_attempts: int = 3
    backoff_base_s: float = 0.5
    timeout_s: float = 60.0
    prompt_token_ceiling: int = DEFAULT_PROMPT_TOKEN_CEILING

    @classmethod
    def from_file(cls, path: str | Path) -> BackendConfig:
        try:
            raw = Path(path).read_text(encoding="utf-8")
        except OSError as err:
            raise ConfigError(f"cannot read backend config {path}: {err}") from err
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as err:
            raise ConfigError(f"backend config {path} is not valid JSON: {err}") from err
        if not isinstance(data, dict) or "base_url" not in data or "model" not in data:
            raise ConfigError(f"backend config {path} needs base_url and model")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"backend config {path} has unknown keys: {sorted(unknown)}")
        return cls(**data)

    def api_key(self) -> str:
        key = os.environ.get(self.api_key_env, "")
        if not key:
            raise ConfigError(f"credentials missing: set {self.api_key_env}")
        return key


def chat_payload(model: str, prompt: str, params: DecodingParams) -> dict:
    """Request body for a chat-completion-style HTTP API."""
    return {
        "model": model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": params.temperature,
        "top_p": params.top_p,
        "top_k": params.top_k,
        "max_tokens": params.max_new_tokens,
    }


class HttpChatBackend:
    """Adapter for any chat-completion-style HTTP endpoint."""

    def __init__(self, config: BackendConfig, session: requests.Session | None = None) -> None:
        self.config = config
        self._session = session or requests.Session()
        self._headers = {"Authorization": f"Bearer {config.api_key()}"}
        self._url = config.base_url.rstrip("/") + "/chat/completions"

    def generate(self, prompt: str, params: DecodingParams) -> str:
        try:
            response = self._session.post(
                self._url,
                json=chat_payload(self.config.model, prompt, params),
                headers=self._headers,
                timeout=self.config.timeout_s,
            )
        except requests.RequestException as err:
            raise TransientBackendError(f"transport failure: {err}") from err
        if response.status_code == 429 or response.status_code >= 500:
            raise TransientBackendError(f"backend returned {response.status_code}")
        if response.status_code != 200:
            raise BackendExhausted(f"backend returned {response.status_code}: {response.text[:200]}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as err:
            raise BackendExhausted(f"malformed backend response: {err}") from err


class _RateLimiter:
    """Serializes request starts to at most ``rps`` per second."""

    def __init__(self, rps: float | None, sleep: Callable[[float], None], clock=time.monotonic):
        if rps is not None and rps <= 0:
            raise InvalidParams("requests_per_second must be positive")
        self._interval = None if rps is None else 1.0 / rps
        self._sleep = sleep
        self._clock = clock
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def wait(self) -> None:
        if self._interval is None:
            return
        with self._lock:
            now = self._clock()
            delay = max(0.0, self._next_slot - now)
            self._next_slot = max(now, self._next_slot) + self._interval
        if delay > 0:
            self._sleep(delay)


class CompletionClient:
    """Dispatches requests to a backend with retries, an RPS ceiling, and a
    prompt-length guard. Safe for concurrent use."""

    def __init__(
        self,
        backend: Backend,
        max_attempts: int = 3,
        backoff_base_s: float = 0.5,
        backoff_cap_s: float = 8.0,
        requests_per_second: float | None = None,
        tokenizer: Tokenizer | None = None,
        prompt_token_ceiling: int = DEFAULT_PROMPT_TOKEN_CEILING,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if max_attempts < 1:
            raise InvalidParams("max_attempts must be >= 1")
        self._backend = backend
        self._max_attempts = max_attempts
        self._backoff_base_s = backoff_base_s
        self._backoff_cap_s = backoff_cap_s
        self._tokenizer = tokenizer or WhitespaceTokenizer()
        self._ceiling = prompt_token_ceiling
        self._sleep = sleep
        self._limiter = _RateLimiter(requests_per_second, sleep)

    @classmethod
    def from_config(cls, config: BackendConfig, **overrides) -> CompletionClient:
        kwargs = dict(
            max_attempts=config.max_attempts,
            backoff_base_s=config.backoff_base_s,
            requests_per_second=config.requests_per_second,
            prompt_token_ceiling=config.prompt_token_ceiling,
        )
        kwargs.update(overrides)
        return cls(HttpChatBackend(config), **kwargs)

    def complete(self, request: CompletionRequest) -> CompletionResult:
        if not request.prompt.strip():
            raise InvalidParams(f"request {request.request_id!r}: prompt must be non-empty")
        tokens = self._tokenizer.count(request.prompt)
        if tokens > self._ceiling:
            raise PromptTooLong(
                f"request {request.request_id!r}: {tokens} tokens > ceiling {self._ceiling}"
            )
        start = time.monotonic()
        last_error: TransientBackendError | None = None
        for attempt in range(1, self._max_attempts + 1):
            self._limiter.wait()
            try:
                text = self._backend.generate(request.prompt, request.params)
            except TransientBackendError as err:
                last_error = err
                if attempt < self._max_attempts:
                    backoff = min(self._backoff_cap_s, self._backoff_base_s * 2 ** (attempt - 1))
                    if backoff > 0:
                        self._sleep(backoff)
                continue
            return CompletionResult(
                request_id=request.request_id,
                text=text,
                latency_s=time.monotonic() - start,
                attempts=attempt,
            )
        raise BackendExhausted(
            f"request {request.request_id!r} failed after {self._max_attempts} attempts: {last_error}"
        )

    def complete_batch(
        self, requests_: Sequence[CompletionRequest], parallelism: int = 1
    ) -> list[CompletionResult | ClaimCheckError]:
        """Run requests with at most ``parallelism`` in flight.

        Results come back in input order; a failing request occupies its slot
        with the error instead of aborting the batch.
        """
        if parallelism < 1:
            raise InvalidParams("parallelism must be >= 1")

        def run(req: CompletionRequest) -> CompletionResult | ClaimCheckError:
            try:
                return self.complete(req)
            except ClaimCheckError as err:
                return err

        if parallelism == 1 or len(requests_) <= 1:
            return [run(req) for req in requests_]
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(run, requests_))
