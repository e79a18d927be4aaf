"""Completion gateway: content-addressed caching over pluggable backends.

Every request is keyed by a fingerprint of (prompt text, decode parameters,
backend id). Completions are stored one JSON file per fingerprint under
<cache>/<first two hex chars>/<fingerprint>.json, written atomically, so a
repeated run serves entirely from cache and is safe under concurrency. The
replay backend reads the same layout, which lets a recorded cache directory
stand in for a live engine that is no longer reachable.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import tempfile
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Protocol, Sequence

from .errors import BatchCompletionFailed, NetworkError, RateLimited, ReplayMiss
from .prompts import Prompt

logger = logging.getLogger(__name__)

API_KEY_ENV_VAR = "LLM_API_KEY"


@dataclass(frozen=True)
class DecodeParams:
    """Decoding controls; the defaults request greedy decoding."""

    temperature: float = 0.0
    max_tokens: int = 256
    stop: tuple[str, ...] = ("\n\nQ:",)

    def to_json(self) -> dict:
        return {
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "stop": list(self.stop),
        }


@dataclass(frozen=True)
class CompletionResult:
    text: str
    truncated: bool
    cached: bool
    fingerprint: str


def fingerprint(prompt_text: str, params: DecodeParams, backend_id: str) -> str:
    """Stable content hash identifying one completion request."""
    payload = json.dumps(
        {"backend": backend_id, "params": params.to_json(), "prompt": prompt_text},
        sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def record_path(root: str | Path, key: str) -> Path:
    return Path(root) / key[:2] / f"{key}.json"


def write_completion_record(root: str | Path, prompt_text: str, params: DecodeParams,
                            backend_id: str, completion: str,
                            truncated: bool = False) -> Path:
    """Store one completion record; used by the cache and to seed replay dirs."""
    key = fingerprint(prompt_text, params, backend_id)
    path = record_path(root, key)
    path.parent.mkdir(parents=True, exist_ok=True)
    record = {
        "fingerprint": key,
        "backend_id": backend_id,
        "params": params.to_json(),
        "prompt": prompt_text,
        "completion": completion,
        "truncated": truncated,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    # write-then-rename keeps concurrent readers off half-written files
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            json.dump(record, handle, ensure_ascii=False)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_completion_record(root: str | Path, key: str) -> dict | None:
    path = record_path(root, key)
    if not path.exists():
        return None
    try:
        with open(path, "r", encoding="utf-8") as handle:
            record = json.load(handle)
    except (OSError, json.JSONDecodeError):
        logger.warning("unreadable completion record %s; refetching", path)
        return None
    if record.get("fingerprint") != key:
        logger.warning("completion record %s names a different fingerprint", path)
        return None
    return record


class Backend(Protocol):
    backend_id: str

    def generate(self, prompt_text: str, params: DecodeParams) -> tuple[str, bool]:
        """Return (completion text, truncated-by-length flag)."""


class ReplayBackend:
    """Serves previously recorded completions; misses are errors, not retries."""

    def __init__(self, root: str | Path, backend_id: str = "replay") -> None:
        self.root = Path(root)
        self.backend_id = backend_id

    def generate(self, prompt_text: str, params: DecodeParams) -> tuple[str, bool]:
        key = fingerprint(prompt_text, params, self.backend_id)
        record = read_completion_record(self.root, key)
        if record is None:
            raise ReplayMiss(key)
        return record["completion"], bool(record.get("truncated", False))


class HttpBackend:
    """Completion-style HTTP backend (POST <base_url>/completions).

    The API key is taken from the LLM_API_KEY environment variable unless
    passed explicitly; requests carry it as a bearer token.
    """

    def __init__(self, base_url: str, model: str, api_key: str | None = None,
                 timeout: float = 60.0) -> None:
        import requests

        self.base_url = base_url.rstrip("/")
        self.backend_id = model
        self.timeout = timeout
        self._api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV_VAR)
        self._session = requests.Session()

    def generate(self, prompt_text: str, params: DecodeParams) -> tuple[str, bool]:
        import requests

        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        body = {
            "model": self.backend_id,
            "prompt": prompt_text,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "stop": list(params.stop),
        }
        try:
            response = self._session.post(f"{self.base_url}/completions",
                                          json=body, headers=headers,
                                          timeout=self.timeout)
        except requests.RequestException as exc:
            raise NetworkError(f"completion request failed: {exc}") from exc
        if response.status_code == 429:
            raise RateLimited("backend returned 429")
        if response.status_code != 200:
            raise NetworkError(f"backend returned {response.status_code}: "
                               f"{response.text[:200]}")
        payload = response.json()
        choice = payload["choices"][0]
        return choice.get("text", ""), choice.get("finish_reason") == "length"


class RateWindow:
    """Sliding-window request budget: at most max_calls per window_seconds."""

    def __init__(self, max_calls: int, window_seconds: float,
                 clock: Callable[[], float] = time.monotonic,
                 sleeper: Callable[[float], None] = time.sleep) -> None:
        if max_calls < 1:
            raise ValueError("max_calls must be at least 1")
        self.max_calls = max_calls
        self.window_seconds = window_seconds
        self._clock = clock
        self._sleeper = sleeper
        self._stamps: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                while self._stamps and now - self._stamps[0] >= self.window_seconds:
                    self._stamps.popleft()
                if len(self._stamps) < self.max_calls:
                    self._stamps.append(now)
                    return
                wait = self.window_seconds - (now - self._stamps[0])
            self._sleeper(max(wait, 0.0))


@dataclass
class RetryPolicy:
    """Exponential backoff with jitter for transient backend failures."""

    attempts: int = 5
    base_delay: float = 1.0
    max_delay: float = 30.0
    sleeper: Callable[[float], None] = time.sleep
    rng: random.Random = field(default_factory=random.Random)

    def delay(self, attempt: int) -> float:
        backoff = min(self.base_delay * (2 ** attempt), self.max_delay)
        return backoff + self.rng.uniform(0.0, self.base_delay)


@dataclass
class GatewayStats:
    requests: int = 0
    cache_hits: int = 0
    backend_calls: int = 0

    def as_dict(self) -> dict:
        return {"requests": self.requests, "cache_hits": self.cache_hits,
                "backend_calls": self.backend_calls}


class CompletionGateway:
    """Batching, caching, rate-limited front door to a completion backend."""

    def __init__(self, backend: Backend, cache_dir: str | Path,
                 rate_window: RateWindow | None = None,
                 retry: RetryPolicy | None = None,
                 parallelism: int = 4) -> None:
        if parallelism < 1:
            raise ValueError("parallelism must be at least 1")
        self.backend = backend
        self.cache_dir = Path(cache_dir)
        self.rate_window = rate_window
        self.retry = retry or RetryPolicy()
        self.parallelism = parallelism
        self.stats = GatewayStats()
        self._stats_lock = threading.Lock()

    # -- single completion ---------------------------------------------------

    def complete(self, prompt: Prompt | str, params: DecodeParams) -> CompletionResult:
        """Complete one prompt, consulting the cache first.

        Cache hits never touch the backend. Fresh completions are truncated at
        the first stop-sequence occurrence and persisted before returning.
        """
        prompt_text = prompt.text if isinstance(prompt, Prompt) else prompt
        key = fingerprint(prompt_text, params, self.backend.backend_id)
        with self._stats_lock:
            self.stats.requests += 1
        record = read_completion_record(self.cache_dir, key)
        if record is not None:
            with self._stats_lock:
                self.stats.cache_hits += 1
            return CompletionResult(record["completion"],
                                    bool(record.get("truncated", False)),
                                    cached=True, fingerprint=key)
        raw, truncated = self._generate_with_retry(prompt_text, params)
        text, cut = _truncate_at_stop(raw, params.stop)
        if cut:
            truncated = False
        write_completion_record(self.cache_dir, prompt_text, params,
                                self.backend.backend_id, text, truncated)
        return CompletionResult(text, truncated, cached=False, fingerprint=key)

    def _generate_with_retry(self, prompt_text: str, params: DecodeParams) -> tuple[str, bool]:
        last_error: Exception | None = None
        for attempt in range(self.retry.attempts):
            if self.rate_window is not None:
                self.rate_window.acquire()
            with self._stats_lock:
                self.stats.backend_calls += 1
            try:
                return self.backend.generate(prompt_text, params)
            except (RateLimited, NetworkError) as exc:
                last_error = exc
                if attempt + 1 < self.retry.attempts:
                    pause = self.retry.delay(attempt)
                    logger.warning("backend attempt %d failed (%s); retrying in %.1fs",
                                   attempt + 1, exc, pause)
                    self.retry.sleeper(pause)
        assert last_error is not None
        raise last_error

    # -- batches -------------------------------------------------------------

    def batch_complete(self, prompts: Sequence[Prompt | str], params: DecodeParams,
                       parallelism: int | None = None) -> list[CompletionResult]:
        """Complete many prompts concurrently, preserving input order.

        All items are attempted; if any fail, BatchCompletionFailed carries the
        partial results (None at failed positions) and the per-item errors.
        """
        workers = parallelism or self.parallelism
        results: list[CompletionResult | None] = [None] * len(prompts)
        errors: list[tuple[int, Exception]] = []
        if not prompts:
            return []
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(self.complete, p, params): i
                       for i, p in enumerate(prompts)}
            for future, index in futures.items():
                try:
                    results[index] = future.result()
                except Exception as exc:  # collected, not raised mid-flight
                    errors.append((index, exc))
        if errors:
            errors.sort(key=lambda pair: pair[0])
            raise BatchCompletionFailed(results, errors)
        return results  # type: ignore[return-value]


def _truncate_at_stop(text: str, stops: Sequence[str]) -> tuple[str, bool]:
    cut_at = None
    for stop in stops:
        idx = text.find(stop)
        if idx != -1 and (cut_at is None or idx < cut_at):
            cut_at = idx
    if cut_at is None:
        return text, False
    return text[:cut_at], True
