"""HTTP and mock transports for the chat and embedding endpoints.

Both remote services speak a plain JSON POST protocol:

* chat:       {model, messages:[{role, content}]} -> {choices:[{message:{content}}]}
* embedding:  {model, input:[texts]}              -> {data:[{index, embedding:[..]}]}

Bearer tokens come from environment variables so keys never live in
config files.  Transient failures (connection errors, HTTP 429/5xx) are
retryable through :class:`RetryPolicy`; auth failures are not.

The mock transports replay scripted responses from a JSONL fixture that
maps a prompt's SHA-256 hex digest to a response sequence.  A ``"*"``
key serves as a catch-all.  Sequence entries are consumed in order, so a
fixture can script two failures followed by a success.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import TransportError

LLM_KEY_ENV = "LITMINE_LLM_KEY"
EMBED_KEY_ENV = "LITMINE_EMBED_KEY"


class TransientTransportError(TransportError):
    """Retryable failure: the next attempt may succeed."""


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass
class RetryPolicy:
    """Bounded retry loop with exponential backoff and injectable sleep."""

    max_retries: int = 3
    backoff_base: float = 0.5
    sleep: Callable[[float], None] = time.sleep
    last_retries: int = field(default=0, init=False)

    def call(self, fn: Callable[[], object]) -> object:
        attempt = 0
        while True:
            try:
                result = fn()
            except TransientTransportError as exc:
                if attempt >= self.max_retries:
                    self.last_retries = attempt
                    raise TransportError(
                        f"gave up after {attempt} retries: {exc}"
                    ) from exc
                self.sleep(self.backoff_base * (2**attempt))
                attempt += 1
                continue
            self.last_retries = attempt
            return result


def _bearer_headers(env_var: str) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    token = os.environ.get(env_var, "")
    if token:
        headers["Authorization"] = f"Bearer {token}"
    return headers


def _check_response(resp: requests.Response) -> dict:
    if resp.status_code in (401, 403):
        raise TransportError(f"authentication rejected (HTTP {resp.status_code})")
    if resp.status_code == 429 or resp.status_code >= 500:
        raise TransientTransportError(f"HTTP {resp.status_code}")
    if resp.status_code != 200:
        raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
    return resp.json()


class HttpChatTransport:
    """Chat-completions client; one prompt in, one response text out."""

    def __init__(
        self,
        url: str,
        model: str,
        key_env: str = LLM_KEY_ENV,
        timeout: float = 120.0,
        session: requests.Session | None = None,
    ) -> None:
        self.url = url
        self.model = model
        self.key_env = key_env
        self.timeout = timeout
        self.session = session or requests.Session()

    def complete(self, prompt: str) -> str:
        payload = {"model": self.model, "messages": [{"role": "user", "content": prompt}]}
        try:
            resp = self.session.post(
                self.url,
                json=payload,
                headers=_bearer_headers(self.key_env),
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise TransientTransportError(str(exc)) from exc
        data = _check_response(resp)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed chat response: {exc}") from exc


class HttpEmbedTransport:
    """Embedding-service client returning one vector per input text."""

    def __init__(
        self,
        url: str,
        model: str,
        key_env: str = EMBED_KEY_ENV,
        timeout: float = 120.0,
        session: requests.Session | None = None,
    ) -> None:
        self.url = url
        self.model = model
        self.key_env = key_env
        self.timeout = timeout
        self.session = session or requests.Session()

    def embed_batch(self, texts: Sequence[str]) -> list[list[float]]:
        payload = {"model": self.model, "input": list(texts)}
        try:
            resp = self.session.post(
                self.url,
                json=payload,
                headers=_bearer_headers(self.key_env),
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise TransientTransportError(str(exc)) from exc
        data = _check_response(resp)
        try:
            rows = sorted(data["data"], key=lambda r: r["index"])
            vectors = [list(map(float, r["embedding"])) for r in rows]
        except (KeyError, TypeError) as exc:
            raise TransportError(f"malformed embedding response: {exc}") from exc
        if len(vectors) != len(texts):
            raise TransportError(
                f"embedding count mismatch: sent {len(texts)}, got {len(vectors)}"
            )
        return vectors


@dataclass
class _Script:
    entries: list[dict]
    cursor: int = 0

    def next_entry(self) -> dict:
        if self.cursor < len(self.entries) - 1:
            entry = self.entries[self.cursor]
            self.cursor += 1
        else:
            entry = self.entries[-1]  # final entry repeats
        return entry


class MockChatTransport:
    """Scripted chat transport for tests and offline runs.

    Fixture lines look like::

        {"prompt_sha256": "<hex>", "responses": [{"content": "..."}]}
        {"prompt": "literal prompt text", "responses": [{"error": "boom"},
                                                        {"content": "ok"}]}
        {"prompt_sha256": "*", "responses": [{"content": "fallback"}]}

    ``error`` entries raise a retryable failure when consumed.
    """

    def __init__(self, scripts: dict[str, list[dict]]) -> None:
        self._scripts = {k: _Script(list(v)) for k, v in scripts.items()}
        self.calls: list[str] = []

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "MockChatTransport":
        scripts: dict[str, list[dict]] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                key = obj.get("prompt_sha256") or prompt_digest(obj["prompt"])
                scripts[key] = list(obj["responses"])
        return cls(scripts)

    def complete(self, prompt: str) -> str:
        self.calls.append(prompt)
        digest = prompt_digest(prompt)
        script = self._scripts.get(digest) or self._scripts.get("*")
        if script is None:
            raise TransportError(f"mock has no script for prompt digest {digest[:12]}")
        entry = script.next_entry()
        if "error" in entry:
            raise TransientTransportError(str(entry["error"]))
        return str(entry["content"])


class MockEmbedTransport:
    """Deterministic embedding transport; optionally fails the first N calls."""

    def __init__(
        self,
        vector_fn: Callable[[str], Sequence[float]],
        fail_first: int = 0,
    ) -> None:
        self.vector_fn = vector_fn
        self.fail_remaining = fail_first
        self.batches: list[list[str]] = []

    def embed_batch(self, texts: Sequence[str]) -> list[list[float]]:
        self.batches.append(list(texts))
        if self.fail_remaining > 0:
            self.fail_remaining -= 1
            raise TransientTransportError("scripted transient failure")
        return [list(map(float, self.vector_fn(t))) for t in texts]
