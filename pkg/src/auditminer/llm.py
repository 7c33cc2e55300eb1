"""Completion-provider contract, JSON recovery, and a scripted test provider.

Providers are plain objects with a ``complete(request) -> str`` method. The
HTTP backend speaks the common chat-completions JSON convention so any
compatible endpoint can serve the pipeline; the scripted provider replays
canned responses FIFO and makes every downstream run deterministic.
"""
from __future__ import annotations

import json
import re
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

import requests

from .errors import ApiStatusError, CompletionTimeoutError, JsonExtractError, ProviderError

DEFAULT_TEMPERATURE = 0.8

_RETRYABLE_STATUSES = {429, 500, 502, 503, 504}
_JSON_START = re.compile(r"[\[{]")
_DECODER = json.JSONDecoder()


@dataclass
class CompletionRequest:
    system_prompt: str
    user_prompt: str
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = 2048
    model_name: str = ""

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")


@dataclass
class RateLimit:
    """At most ``max_requests`` per ``interval_seconds``; 0 disables the limit."""

    max_requests: int = 0
    interval_seconds: float = 1.0


@dataclass
class ProviderConfig:
    endpoint: str = ""
    api_key: str = ""
    retry_limit: int = 3
    request_timeout: float = 60.0
    rate_limit: RateLimit = field(default_factory=RateLimit)

    def __post_init__(self) -> None:
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")
        if self.request_timeout <= 0:
            raise ValueError("request_timeout must be > 0")


class Provider(Protocol):
    def complete(self, request: CompletionRequest) -> str: ...


def complete(request: CompletionRequest, provider: Provider) -> str:
    """Run one completion against the given provider handle."""
    return provider.complete(request)


class ScriptedProvider:
    """Replays a fixed queue of responses, one per call, FIFO.

    Script files are JSON arrays; non-string entries are serialized, which
    lets fixtures state structured responses directly. Consumption is
    serialized under a lock, and every request is recorded for assertions.
    """

    def __init__(self, responses: Iterable[str]):
        self._queue: deque[str] = deque(responses)
        self._lock = threading.Lock()
        self.requests: list[CompletionRequest] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedProvider":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, list):
            raise ProviderError(f"{path}: script must be a JSON array of responses")
        return cls([item if isinstance(item, str) else json.dumps(item) for item in data])

    @property
    def calls(self) -> int:
        return len(self.requests)

    def remaining(self) -> int:
        return len(self._queue)

    def complete(self, request: CompletionRequest) -> str:
        with self._lock:
            self.requests.append(request)
            if not self._queue:
                raise ProviderError("scripted provider queue exhausted")
            return self._queue.popleft()


class HttpProvider:
    """Chat-completions HTTP backend with retry, backoff, and rate limiting.

    Only transport-level failures (connection errors, timeouts, 429/5xx) are
    retried; semantically bad content is the caller's problem.
    """

    def __init__(self, config: ProviderConfig, session=None, sleep=time.sleep):
        if not config.endpoint:
            raise ProviderError("http provider requires an endpoint")
        self._config = config
        self._session = session or requests.Session()
        self._sleep = sleep
        self._lock = threading.Lock()
        self._recent: deque[float] = deque()

    def _throttle(self) -> None:
        limit = self._config.rate_limit
        if limit.max_requests <= 0:
            return
        with self._lock:
            now = time.monotonic()
            while self._recent and now - self._recent[0] >= limit.interval_seconds:
                self._recent.popleft()
            if len(self._recent) >= limit.max_requests:
                wait = limit.interval_seconds - (now - self._recent[0])
                if wait > 0:
                    self._sleep(wait)
                now = time.monotonic()
                while self._recent and now - self._recent[0] >= limit.interval_seconds:
                    self._recent.popleft()
            self._recent.append(time.monotonic())

    def _payload(self, request: CompletionRequest) -> dict:
        messages = []
        if request.system_prompt:
            messages.append({"role": "system", "content": request.system_prompt})
        messages.append({"role": "user", "content": request.user_prompt})
        return {
            "model": request.model_name,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
            "messages": messages,
        }

    def complete(self, request: CompletionRequest) -> str:
        cfg = self._config
        headers = {}
        if cfg.api_key:
            headers["Authorization"] = f"Bearer {cfg.api_key}"
        attempts = cfg.retry_limit + 1
        delay = 0.5
        last_error: ProviderError | None = None
        for attempt in range(attempts):
            self._throttle()
            try:
                response = self._session.post(
                    cfg.endpoint,
                    json=self._payload(request),
                    headers=headers,
                    timeout=cfg.request_timeout,
                )
            except requests.Timeout as exc:
                last_error = CompletionTimeoutError(f"request timed out: {exc}")
            except requests.RequestException as exc:
                last_error = ProviderError(f"transport failure: {exc}")
            else:
                if 200 <= response.status_code < 300:
                    return self._content(response)
                error = ApiStatusError(response.status_code, response.text[:200])
                if response.status_code not in _RETRYABLE_STATUSES:
                    raise error
                last_error = error
            if attempt < attempts - 1:
                self._sleep(delay)
                delay *= 2
        assert last_error is not None
        raise last_error

    @staticmethod
    def _content(response) -> str:
        try:
            data = response.json()
            return data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"unexpected response shape: {exc}") from exc


def extract_json(text: str):
    """Parse the first balanced JSON object or array found in ``text``.

    Tolerates code fences and prose around the value. Raises JsonExtractError
    (carrying the raw text) when nothing parseable is present.
    """
    for match in _JSON_START.finditer(text):
        try:
            value, _ = _DECODER.raw_decode(text, match.start())
            return value
        except ValueError:
            continue
    raise JsonExtractError("no JSON object or array found in model output", raw_text=text)
