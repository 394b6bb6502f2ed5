"""OpenAI-compatible chat-completions client with a response cache, retries and budget ledger."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import httpx

from .types import EvoforgeError

log = logging.getLogger(__name__)

PURPOSES = ("operator", "task_eval")
DEFAULT_API_KEY_ENV = "EVOFORGE_API_KEY"

# sampling for LLM-driven operators vs. task evaluation
OPERATOR_TEMPERATURE = 0.5
OPERATOR_TOP_P = 0.95
EVAL_TEMPERATURE = 0.0

RETRYABLE_STATUS = {408, 409, 429, 500, 502, 503, 504}


class ProviderError(EvoforgeError):
    """Hard provider failure after retries were exhausted."""

    def __init__(self, message: str, status: int | None = None, request_id: str | None = None):
        self.status = status
        self.request_id = request_id
        super().__init__(message + (f" (request id {request_id})" if request_id else ""))


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = EVAL_TEMPERATURE
    top_p: float = 1.0
    max_tokens: int = 256
    purpose: str = "task_eval"

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple((r, c) for r, c in self.messages))
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must lie in (0, 1]")
        if self.purpose not in PURPOSES:
            raise ValueError(f"unknown purpose {self.purpose!r}")

    @classmethod
    def user(cls, model: str, content: str, **kw) -> "CompletionRequest":
        return cls(model, (("user", content),), **kw)

    def payload(self) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
        }

    def cache_key(self) -> str:
        blob = json.dumps(self.payload(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class BudgetLedger:
    """Network requests by purpose, token usage, and cache hits. Counters only grow."""

    requests_by_purpose: dict[str, int] = field(default_factory=lambda: {p: 0 for p in PURPOSES})
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cache_hits: int = 0

    def __post_init__(self):
        self._lock = threading.Lock()

    def record_request(self, purpose: str, usage: dict | None) -> None:
        usage = usage or {}
        with self._lock:
            self.requests_by_purpose[purpose] = self.requests_by_purpose.get(purpose, 0) + 1
            self.prompt_tokens += int(usage.get("prompt_tokens", 0) or 0)
            self.completion_tokens += int(usage.get("completion_tokens", 0) or 0)

    def record_hit(self) -> None:
        with self._lock:
            self.cache_hits += 1

    @property
    def total_requests(self) -> int:
        return sum(self.requests_by_purpose.values())

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "requests_by_purpose": dict(sorted(self.requests_by_purpose.items())),
                "prompt_tokens": self.prompt_tokens,
                "completion_tokens": self.completion_tokens,
                "cache_hits": self.cache_hits,
            }

    to_dict = snapshot

    @classmethod
    def from_dict(cls, d: dict) -> "BudgetLedger":
        return cls(dict(d.get("requests_by_purpose", {})), int(d.get("prompt_tokens", 0)),
                   int(d.get("completion_tokens", 0)), int(d.get("cache_hits", 0)))

    def __eq__(self, other):
        return isinstance(other, BudgetLedger) and self.snapshot() == other.snapshot()


def expected_requests(n: int, t: int, dev_size: int) -> int:
    """Requests for T iterations of N candidates: one generation plus |D| evaluations each."""
    return n * t * (1 + dev_size)


def budget_report(ledger: BudgetLedger, n: int | None = None, t: int | None = None,
                  dev_size: int | None = None) -> dict:
    snap = ledger.snapshot()
    total = sum(snap["requests_by_purpose"].values())
    lookups = total + snap["cache_hits"]
    report = {
        "requests_by_purpose": snap["requests_by_purpose"],
        "total_requests": total,
        "prompt_tokens": snap["prompt_tokens"],
        "completion_tokens": snap["completion_tokens"],
        "total_tokens": snap["prompt_tokens"] + snap["completion_tokens"],
        "cache_hits": snap["cache_hits"],
        "cache_hit_rate": snap["cache_hits"] / lookups if lookups else 0.0,
    }
    if None not in (n, t, dev_size):
        report["expected_requests"] = expected_requests(n, t, dev_size)
    return report


class ResponseCache:
    """Append-only JSONL cache of ``{key, response, usage}``; the first stored value wins."""

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path else None
        self._data: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    rec = json.loads(line)
                    self._data.setdefault(rec["key"], rec)

    def get(self, key: str) -> dict | None:
        with self._lock:
            return self._data.get(key)

    def put(self, key: str, response: str, usage: dict | None) -> None:
        rec = {"key": key, "response": response, "usage": usage or {}}
        with self._lock:
            if key in self._data:
                return
            self._data[key] = rec
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")

    def __len__(self) -> int:
        return len(self._data)


class TokenBucket:
    """Admits at most ``rate_per_minute`` requests per minute, with bursts up to ``burst``."""

    def __init__(self, rate_per_minute: float, burst: int = 1,
                 clock: Callable[[], float] = time.monotonic, sleep: Callable[[float], None] = time.sleep):
        self.rate = rate_per_minute / 60.0
        self.capacity = float(burst)
        self.tokens = float(burst)
        self.clock, self.sleep = clock, sleep
        self.updated = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            while True:
                now = self.clock()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1:
                    self.tokens -= 1
                    return
                self.sleep((1 - self.tokens) / self.rate)


class ChatClient:
    """Thread-safe client for ``POST {base_url}/v1/chat/completions``.

    Transport errors and retryable statuses are retried with exponential backoff up to
    ``max_attempts`` times; a 429 ``Retry-After`` header overrides the backoff delay.
    """

    def __init__(self, base_url: str = "https://api.openai.com", api_key: str | None = None,
                 api_key_env: str = DEFAULT_API_KEY_ENV, cache_path: str | os.PathLike | None = None,
                 use_cache: bool = True, max_attempts: int = 5, backoff_base: float = 1.0,
                 backoff_max: float = 30.0, requests_per_minute: float | None = None,
                 timeout: float = 60.0, transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep, ledger: BudgetLedger | None = None):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(api_key_env)
        self.use_cache = use_cache
        self.cache = ResponseCache(cache_path) if use_cache else None
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.backoff_max = backoff_max
        self.limiter = TokenBucket(requests_per_minute) if requests_per_minute else None
        self.sleep = sleep
        self.ledger = ledger or BudgetLedger()
        self.network_calls = 0
        self._calls_lock = threading.Lock()
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        self._http = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    @property
    def endpoint(self) -> str:
        return f"{self.base_url}/v1/chat/completions"

    def close(self) -> None:
        self._http.close()

    def complete(self, request: CompletionRequest) -> str:
        key = request.cache_key()
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                self.ledger.record_hit()
                return hit["response"]
        text, usage = self._post(request)
        self.ledger.record_request(request.purpose, usage)
        if self.cache is not None:
            self.cache.put(key, text, usage)
        return text

    def _delay(self, attempt: int, response: httpx.Response | None) -> float:
        if response is not None and response.status_code == 429:
            retry_after = response.headers.get("retry-after")
            if retry_after is not None:
                try:
                    return max(0.0, float(retry_after))
                except ValueError:
                    pass
        return min(self.backoff_max, self.backoff_base * 2 ** attempt)

    def _post(self, request: CompletionRequest) -> tuple[str, dict]:
        last_err = "no attempt made"
        status = request_id = None
        for attempt in range(self.max_attempts):
            if self.limiter is not None:
                self.limiter.acquire()
            response = None
            with self._calls_lock:
                self.network_calls += 1
            try:
                response = self._http.post(self.endpoint, json=request.payload())
            except httpx.TransportError as exc:
                last_err = f"transport error: {exc}"
            else:
                status = response.status_code
                request_id = response.headers.get("x-request-id")
                if 200 <= status < 300:
                    return self._parse(response, request_id)
                last_err = f"HTTP {status}: {response.text[:200]}"
                if status not in RETRYABLE_STATUS:
                    break
            if attempt + 1 < self.max_attempts:
                delay = self._delay(attempt, response)
                log.warning("chat completion failed (%s); retrying in %.1fs", last_err, delay)
                self.sleep(delay)
        raise ProviderError(f"chat completion failed: {last_err}", status, request_id)

    @staticmethod
    def _parse(response: httpx.Response, request_id: str | None) -> tuple[str, dict]:
        try:
            body = response.json()
            content = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed completion response: {exc}",
                                response.status_code, request_id) from exc
        return content or "", body.get("usage") or {}


def complete_many(client, requests: Sequence[CompletionRequest], max_workers: int = 1) -> list[str]:
    if max_workers <= 1 or len(requests) <= 1:
        return [client.complete(r) for r in requests]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(client.complete, requests))
