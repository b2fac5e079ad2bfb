"""Text-completion backends: an offline deterministic mock, an HTTP chat client,
and a logging wrapper that records every completion for audit and replay."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Protocol

import httpx

from .errors import BackendError

log = logging.getLogger(__name__)

ENV_URL = "LITHOROUTE_API_URL"
ENV_MODEL = "LITHOROUTE_MODEL"
ENV_KEY = "LITHOROUTE_API_KEY"


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.6
    top_p: float = 0.7
    max_tokens: int = 8192
    seed: int = 0
    votes: int = 3

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must lie in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.votes < 1 or self.votes % 2 == 0:
            raise ValueError("votes must be odd and >= 1")


class Backend(Protocol):
    def complete(self, system: str, user: str, params: SamplingParams) -> str: ...


def request_key(system: str, user: str, params: SamplingParams) -> str:
    blob = json.dumps([system, user, asdict(params)], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


# ------------------------------------------------------------------------- mock

_WINDOW_ROW = re.compile(r"^t=(\d+)\b.*\|\s*probs\s+(.*)$")
_NEIGHBOR_ROW = re.compile(r"^t=(\d+):\s*([^;(]+?)\s*\(")
_CANDIDATE_ROW = re.compile(r"^t=(\d+):\s*(.*)$")
_SECTION = re.compile(r"^## (\w+)")


def _sections(text: str) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    current = None
    for line in text.splitlines():
        m = _SECTION.match(line)
        if m:
            current = m.group(1).strip().upper()
            out[current] = []
        elif current is not None and line.strip():
            out[current].append(line.strip())
    return out


class MockBackend:
    """Deterministic offline reasoner; a pure function of (prompt text, seed).

    Panel prompts: each depth takes its nearest neighbour's label when the
    neighbour section is present, else the base-classifier argmax. Refinement
    prompts: each depth takes the plurality of the candidate labels. Ties are
    broken by a hash of the prompt and seed.
    """

    def __init__(self):
        self.calls = 0
        self._lock = threading.Lock()

    def _tiebreak(self, options: list[str], system: str, user: str, seed: int, t: int) -> str:
        if len(options) == 1:
            return options[0]
        h = hashlib.sha256(f"{seed}|{t}|{system}|{user}".encode()).digest()
        return sorted(options)[int.from_bytes(h[:4], "big") % len(options)]

    def complete(self, system: str, user: str, params: SamplingParams) -> str:
        with self._lock:
            self.calls += 1
        sec = _sections(user)
        answer: dict[int, str] = {}
        if "CANDIDATES" in sec:
            for row in sec["CANDIDATES"]:
                m = _CANDIDATE_ROW.match(row)
                if not m:
                    continue
                votes: dict[str, int] = {}
                for item in m.group(2).split(";"):
                    _, _, lab = item.partition("=")
                    lab = lab.strip()
                    votes[lab] = votes.get(lab, 0) + 1
                top = max(votes.values())
                answer[int(m.group(1))] = self._tiebreak(
                    [k for k, v in votes.items() if v == top], system, user, params.seed, int(m.group(1)))
            basis = "plurality of candidate labels"
        else:
            nearest = {}
            for row in sec.get("NEIGHBORS", []):
                m = _NEIGHBOR_ROW.match(row)
                if m:
                    nearest[int(m.group(1))] = m.group(2)
            for row in sec.get("WINDOW", []):
                m = _WINDOW_ROW.match(row)
                if not m:
                    continue
                t = int(m.group(1))
                if t in nearest:
                    answer[t] = nearest[t]
                    continue
                probs = {}
                for item in m.group(2).split(";"):
                    name, _, val = item.rpartition("=")
                    probs[name.strip()] = float(val)
                top = max(probs.values())
                answer[t] = self._tiebreak(
                    [k for k, v in probs.items() if v == top], system, user, params.seed, t)
            basis = "nearest neighbour label" if nearest else "base classifier argmax"
        body = "\n".join(f"{t}: {lab}" for t, lab in sorted(answer.items()))
        return f"Offline heuristic: {basis} per depth.\n```answer\n{body}\n```\n"


# ------------------------------------------------------------------------- http

RETRYABLE_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


class HTTPBackend:
    """Chat-completions client (OpenAI-compatible JSON) with exponential backoff."""

    def __init__(
        self,
        url: str | None = None,
        model: str | None = None,
        api_key: str | None = None,
        attempts: int = 3,
        backoff: float = 1.0,
        timeout: float = 120.0,
        client: httpx.Client | None = None,
        sleep=time.sleep,
    ):
        self.url = url or os.environ.get(ENV_URL)
        self.model = model or os.environ.get(ENV_MODEL)
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_KEY)
        if not self.url or not self.model:
            raise BackendError(f"remote backend needs a URL and model ({ENV_URL}, {ENV_MODEL})")
        self.attempts = attempts
        self.backoff = backoff
        self.client = client or httpx.Client(timeout=timeout)
        self._sleep = sleep

    def payload(self, system: str, user: str, params: SamplingParams) -> dict:
        return {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_tokens,
            "seed": params.seed,
        }

    def complete(self, system: str, user: str, params: SamplingParams) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = self.payload(system, user, params)
        last = "no attempt made"
        for attempt in range(self.attempts):
            try:
                resp = self.client.post(self.url, json=body, headers=headers)
            except httpx.TransportError as exc:
                last = f"{type(exc).__name__}: {exc}"
            else:
                if resp.status_code == 200:
                    try:
                        return resp.json()["choices"][0]["message"]["content"]
                    except (ValueError, KeyError, IndexError, TypeError) as exc:
                        raise BackendError(f"malformed completion payload: {exc}") from None
                last = f"HTTP {resp.status_code}: {resp.text[:200]}"
                if resp.status_code not in RETRYABLE_STATUS:
                    raise BackendError(last)
            if attempt + 1 < self.attempts:
                delay = self.backoff * 2 ** attempt
                log.warning("backend attempt %d failed (%s); retrying in %.1fs", attempt + 1, last, delay)
                self._sleep(delay)
        raise BackendError(f"backend unreachable after {self.attempts} attempts: {last}")


# ---------------------------------------------------------------------- logging


class CompletionLog:
    """Append-only JSONL of completions keyed by request hash."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._cache: dict[str, str] = {}
        if self.path.exists():
            for line in self.path.read_text().splitlines():
                if line.strip():
                    rec = json.loads(line)
                    self._cache[rec["key"]] = rec["response"]

    def __contains__(self, key: str) -> bool:
        return key in self._cache

    def __len__(self) -> int:
        return len(self._cache)

    def get(self, key: str) -> str | None:
        return self._cache.get(key)

    def append(self, key: str, system: str, user: str, params: SamplingParams, response: str):
        rec = {"key": key, "params": asdict(params), "system": system, "user": user, "response": response}
        with self._lock:
            if key in self._cache:
                return
            self._cache[key] = response
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a") as fh:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


class LoggedBackend:
    """Serve logged completions when present; otherwise call through and log."""

    def __init__(self, inner: Backend, log_: CompletionLog):
        self.inner = inner
        self.log = log_
        self.live_calls = 0
        self.replayed = 0
        self._lock = threading.Lock()

    def complete(self, system: str, user: str, params: SamplingParams) -> str:
        key = request_key(system, user, params)
        cached = self.log.get(key)
        if cached is not None:
            with self._lock:
                self.replayed += 1
            return cached
        text = self.inner.complete(system, user, params)
        with self._lock:
            self.live_calls += 1
        self.log.append(key, system, user, params, text)
        return text
