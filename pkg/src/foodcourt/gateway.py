"""Chat-completion gateway: the only module that talks to a model service.

Three modes:
  live    - send requests, return responses, persist nothing
  record  - live, plus append every completion to a cache file
  replay  - serve responses from the cache by request fingerprint; the network
            is never touched

The cache is a single append-only file: 8 magic bytes then length-prefixed
JSON records, so a recording travels with its run log. Replay keeps the first
record seen per fingerprint as canonical.
"""

from __future__ import annotations

import json
import random
import struct
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import (
    CacheFormatError,
    CacheMissError,
    RequestCapExceeded,
    TransientTransportError,
    TransportError,
)
from .util import canonical_json, sha256_hex

CACHE_MAGIC = b"FCRC0001"
GATEWAY_MODES = ("live", "record", "replay")

DEFAULT_RETRY_ATTEMPTS = 5
DEFAULT_RETRY_BASE = 1.0   # seconds
DEFAULT_RETRY_CAP = 60.0   # seconds
DEFAULT_PARALLELISM = 4
DEFAULT_REQUEST_CAP = 5000


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    system: str
    messages: tuple[tuple[str, str], ...]  # (role, content)
    temperature: float = 0.7
    max_tokens: int = 1024

    def fingerprint(self) -> str:
        """Stable content hash; excludes anything timing-related by construction."""
        payload = {
            "model": self.model,
            "system": self.system,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        return sha256_hex(canonical_json(payload))

    def wire_payload(self) -> dict:
        messages = [{"role": "system", "content": self.system}]
        messages += [{"role": r, "content": c} for r, c in self.messages]
        return {
            "model": self.model,
            "messages": messages,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }


@dataclass(frozen=True)
class CompletionRecord:
    fingerprint: str
    request: dict
    response: str
    latency_ms: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    timestamp: float = 0.0

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "request": self.request,
            "response": self.response,
            "latency_ms": self.latency_ms,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CompletionRecord":
        return cls(
            fingerprint=data["fingerprint"],
            request=data.get("request", {}),
            response=data["response"],
            latency_ms=int(data.get("latency_ms", 0)),
            prompt_tokens=int(data.get("prompt_tokens", 0)),
            completion_tokens=int(data.get("completion_tokens", 0)),
            timestamp=float(data.get("timestamp", 0.0)),
        )


# --- cache file ---------------------------------------------------------------


def read_cache(path) -> list[CompletionRecord]:
    raw = Path(path).read_bytes()
    if raw[: len(CACHE_MAGIC)] != CACHE_MAGIC:
        raise CacheFormatError(f"{path}: bad magic bytes or unsupported version")
    records = []
    offset = len(CACHE_MAGIC)
    while offset < len(raw):
        if offset + 4 > len(raw):
            raise CacheFormatError(f"{path}: truncated record length at byte {offset}")
        (length,) = struct.unpack(">I", raw[offset:offset + 4])
        offset += 4
        blob = raw[offset:offset + length]
        if len(blob) != length:
            raise CacheFormatError(f"{path}: truncated record body at byte {offset}")
        offset += length
        try:
            records.append(CompletionRecord.from_dict(json.loads(blob)))
        except (json.JSONDecodeError, KeyError) as exc:
            raise CacheFormatError(f"{path}: corrupt record: {exc}") from exc
    return records


class CacheWriter:
    """Append-only cache file writer; safe for concurrent appends."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        if not self.path.exists() or self.path.stat().st_size == 0:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_bytes(CACHE_MAGIC)

    def append(self, record: CompletionRecord) -> None:
        blob = json.dumps(record.to_dict(), sort_keys=True,
                          separators=(",", ":")).encode("utf-8")
        with self._lock:
            with self.path.open("ab") as fh:
                fh.write(struct.pack(">I", len(blob)))
                fh.write(blob)


# --- transports ----------------------------------------------------------------


class HttpTransport:
    """POSTs an OpenAI-style chat payload to `{base_url}/chat/completions`."""

    retryable_statuses = frozenset({408, 409, 429, 500, 502, 503, 504})

    def __init__(self, base_url: str, api_key: str | None = None,
                 timeout: float = 120.0, session=None):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout
        self.session = session or requests.Session()

    def send(self, payload: dict) -> tuple[str, dict]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self.session.post(f"{self.base_url}/chat/completions",
                                     json=payload, headers=headers,
                                     timeout=self.timeout)
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise TransientTransportError(str(exc)) from exc
        if resp.status_code in self.retryable_statuses:
            raise TransientTransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        if resp.status_code != 200:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
            content = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError) as exc:
            raise TransportError(f"malformed completion response: {exc}") from exc
        usage = body.get("usage") or {}
        return content, usage


class NullTransport:
    """Transport that must never be reached (replay mode, tests)."""

    def __init__(self):
        self.calls = 0

    def send(self, payload: dict) -> tuple[str, dict]:
        self.calls += 1
        raise TransportError("network transport invoked in offline mode")


# --- gateway --------------------------------------------------------------------


@dataclass
class RetryPolicy:
    attempts: int = DEFAULT_RETRY_ATTEMPTS
    base: float = DEFAULT_RETRY_BASE
    cap: float = DEFAULT_RETRY_CAP
    jitter: float = 0.25

    def delay(self, attempt: int, rng: random.Random) -> float:
        """Backoff before retry `attempt` (1-based). Monotonically non-decreasing
        up to the cap: doubling growth dominates the bounded jitter."""
        raw = min(self.base * (2 ** (attempt - 1)), self.cap)
        return min(raw * (1.0 + rng.uniform(0.0, self.jitter)), self.cap)


@dataclass
class RateLimit:
    """Sliding-window requests-per-minute budget."""

    rpm: int | None = None
    _window: list = field(default_factory=list)

    def wait(self, clock, sleep) -> None:
        if not self.rpm:
            return
        while True:
            now = clock()
            self._window = [t for t in self._window if now - t < 60.0]
            if len(self._window) < self.rpm:
                self._window.append(now)
                return
            sleep(max(0.0, self._window[0] + 60.0 - now))


class Gateway:
    """Shared completion client; safe for concurrent callers and enforcing the
    parallelism bound internally."""

    def __init__(self, mode: str, transport=None, cache_path=None,
                 request_cap: int = DEFAULT_REQUEST_CAP,
                 parallelism: int = DEFAULT_PARALLELISM,
                 rpm: int | None = None,
                 retry: RetryPolicy | None = None,
                 clock=time.monotonic, sleep=time.sleep,
                 rng: random.Random | None = None):
        if mode not in GATEWAY_MODES:
            raise ValueError(f"unknown gateway mode {mode!r}")
        self.mode = mode
        self.transport = transport
        self.retry = retry or RetryPolicy()
        self.request_cap = request_cap
        self.requests_used = 0
        self._clock = clock
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._ratelimit = RateLimit(rpm)
        self._semaphore = threading.Semaphore(max(1, parallelism))
        self._count_lock = threading.Lock()
        self._index: dict[str, str] = {}
        self._writer: CacheWriter | None = None

        if mode == "replay":
            if cache_path is None:
                raise CacheFormatError("replay mode requires a cache file")
            for record in read_cache(cache_path):
                self._index.setdefault(record.fingerprint, record.response)
        elif mode == "record":
            if cache_path is None:
                raise CacheFormatError("record mode requires a cache path")
            self._writer = CacheWriter(cache_path)
        if mode in ("live", "record") and transport is None:
            raise TransportError(f"{mode} mode requires a transport")

    def complete(self, request: CompletionRequest) -> str:
        """Resolve one completion according to the gateway mode."""
        fp = request.fingerprint()
        if self.mode == "replay":
            try:
                return self._index[fp]
            except KeyError:
                raise CacheMissError(fp) from None

        with self._count_lock:
            if self.requests_used >= self.request_cap:
                raise RequestCapExceeded(self.request_cap)
            self.requests_used += 1

        self._ratelimit.wait(self._clock, self._sleep)
        with self._semaphore:
            started = self._clock()
            text, usage = self._send_with_retries(request.wire_payload())
            latency_ms = int((self._clock() - started) * 1000)

        if self._writer is not None:
            self._writer.append(CompletionRecord(
                fingerprint=fp,
                request=request.wire_payload(),
                response=text,
                latency_ms=latency_ms,
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
                timestamp=time.time(),
            ))
        return text

    def _send_with_retries(self, payload: dict) -> tuple[str, dict]:
        last: Exception | None = None
        for attempt in range(1, self.retry.attempts + 1):
            try:
                return self.transport.send(payload)
            except TransientTransportError as exc:
                last = exc
                if attempt < self.retry.attempts:
                    self._sleep(self.retry.delay(attempt, self._rng))
        raise TransportError(
            f"transport failed after {self.retry.attempts} attempts: {last}") from last
