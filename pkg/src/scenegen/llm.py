"""Text-model adapter shared by the agents.

``stub`` mode answers every request from a keyed hash of the request, so
whole pipelines run offline and reproducibly. ``remote`` mode speaks the
common chat-completions JSON protocol over HTTP(S).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import struct
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Any

from .ingest import CATEGORIES

log = logging.getLogger(__name__)

SCHEMA_KINDS = ("feature-vector", "rule-text", "score", "category-label")
DEFAULT_API_KEY_ENV = "SCENEGEN_API_KEY"


class LLMError(RuntimeError):
    pass


class AuthError(LLMError):
    pass


class SchemaError(LLMError):
    pass


@dataclass(frozen=True)
class SchemaHint:
    kind: str
    dim: int = 0

    def __post_init__(self):
        if self.kind not in SCHEMA_KINDS:
            raise ValueError(f"unknown schema kind {self.kind!r}")
        if self.kind == "feature-vector" and self.dim < 1:
            raise ValueError("feature-vector schema needs dim >= 1")


@dataclass(frozen=True)
class CompletionRequest:
    system_prompt: str
    user_prompt: str
    temperature: float = 0.0
    max_tokens: int = 256
    schema_hint: SchemaHint | None = None

    def __post_init__(self):
        if not self.system_prompt.strip() or not self.user_prompt.strip():
            raise ValueError("prompts must be nonempty")
        if self.temperature < 0 or self.max_tokens < 1:
            raise ValueError("temperature >= 0 and max_tokens >= 1 required")


@dataclass
class CompletionResponse:
    text: str
    parsed: Any = None
    provenance: str = "stub"
    latency_ms: float = 0.0


# -- parsing -------------------------------------------------------------

_NUMBER = re.compile(r"[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?")


def parse_payload(text: str, hint: SchemaHint | None) -> Any:
    """Parse model text per ``hint``; raises SchemaError on mismatch."""
    if hint is None:
        return None
    if hint.kind == "feature-vector":
        nums = [float(x) for x in _NUMBER.findall(text)]
        if len(nums) < hint.dim:
            raise SchemaError(f"expected {hint.dim} numbers, got {len(nums)}")
        vec = nums[: hint.dim]
        if any(not 0 <= v <= 1 for v in vec):
            raise SchemaError("feature values must lie in [0, 1]")
        return vec
    if hint.kind == "score":
        nums = _NUMBER.findall(text)
        if not nums:
            raise SchemaError("no score in response")
        return min(1.0, max(0.0, float(nums[0])))
    if hint.kind == "category-label":
        low = text.strip().lower()
        for c in CATEGORIES:
            if c.lower() in low:
                return c
        raise SchemaError(f"no category label in {text!r}")
    # rule-text: first non-empty line
    for line in text.splitlines():
        if line.strip():
            return line.strip()
    raise SchemaError("empty rule text")


# -- stub ----------------------------------------------------------------


def _digest(seed: int, *parts: str) -> bytes:
    h = hashlib.blake2b(key=str(seed).encode(), digest_size=64)
    for p in parts:
        h.update(p.encode("utf-8"))
        h.update(b"\x00")
    return h.digest()


def hash_uniforms(seed: int, n: int, *parts: str) -> list[float]:
    """``n`` deterministic values in [0, 1) from a keyed hash of ``parts``."""
    out: list[float] = []
    counter = 0
    while len(out) < n:
        block = _digest(seed, *parts, str(counter))
        for i in range(0, len(block), 8):
            if len(out) == n:
                break
            (v,) = struct.unpack(">Q", block[i:i + 8])
            out.append((v >> 11) / float(1 << 53))
        counter += 1
    return out


def _stub_text(seed: int, req: CompletionRequest) -> str:
    hint = req.schema_hint
    key = (req.system_prompt, req.user_prompt, hint.kind if hint else "", str(hint.dim if hint else ""))
    if hint is None:
        return "ok " + _digest(seed, *key).hex()[:16]
    if hint.kind == "feature-vector":
        return ", ".join(f"{v:.6f}" for v in hash_uniforms(seed, hint.dim, *key))
    if hint.kind == "score":
        return f"{hash_uniforms(seed, 1, *key)[0]:.6f}"
    if hint.kind == "category-label":
        return CATEGORIES[_digest(seed, *key)[0] % len(CATEGORIES)]
    # rule-text: the stub "translates" by normalising the constraint phrasing
    from .planner_agent import normalize_constraint

    return normalize_constraint(req.user_prompt.splitlines()[-1])


# -- adapter -------------------------------------------------------------


@dataclass
class LLMAdapter:
    mode: str = "stub"
    seed: int = 0
    endpoint: str = ""
    model: str = ""
    api_key: str | None = None
    timeout: float = 30.0
    max_in_flight: int = 4
    retries: int = 3
    backoff: float = 0.5
    _sem: threading.BoundedSemaphore = field(init=False, repr=False)

    def __post_init__(self):
        if self.mode not in ("stub", "remote"):
            raise ValueError(f"unknown llm mode {self.mode!r}")
        if self.mode == "remote" and not self.endpoint:
            raise ValueError("remote mode needs an endpoint")
        self._sem = threading.BoundedSemaphore(max(1, self.max_in_flight))

    @classmethod
    def from_env(cls, mode: str, seed: int = 0, key_env: str = DEFAULT_API_KEY_ENV, **kw) -> "LLMAdapter":
        return cls(mode=mode, seed=seed, api_key=os.environ.get(key_env), **kw)

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        t0 = time.perf_counter()
        if self.mode == "stub":
            text, provenance = _stub_text(self.seed, req), "stub"
        else:
            with self._sem:
                text, provenance = self._remote(req), "remote"
        parsed = None
        if req.schema_hint is not None:
            try:
                parsed = parse_payload(text, req.schema_hint)
            except SchemaError as exc:
                log.warning("schema parse failed (%s): %s", req.schema_hint.kind, exc)
        return CompletionResponse(text, parsed, provenance, (time.perf_counter() - t0) * 1e3)

    def _remote(self, req: CompletionRequest) -> str:
        body = json.dumps({
            "model": self.model,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }).encode()
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = self.endpoint.rstrip("/")
        if not url.endswith("/chat/completions"):
            url += "/chat/completions"
        last: Exception | None = None
        for attempt in range(self.retries):
            try:
                r = urllib.request.Request(url, data=body, headers=headers, method="POST")
                with urllib.request.urlopen(r, timeout=self.timeout) as resp:
                    payload = json.loads(resp.read())
                return payload["choices"][0]["message"]["content"]
            except urllib.error.HTTPError as exc:
                if exc.code in (401, 403):
                    raise AuthError(f"authentication failed ({exc.code})") from exc
                last = exc
            except (urllib.error.URLError, TimeoutError, OSError, KeyError, ValueError) as exc:
                last = exc
            if attempt + 1 < self.retries:
                time.sleep(self.backoff * 2 ** attempt)
        raise LLMError(f"request failed after {self.retries} attempts: {last}")

    def extract_features(self, text: str, dim: int) -> list[float]:
        if dim < 1:
            raise ValueError("dim must be >= 1")
        req = CompletionRequest(
            system_prompt=f"Describe the entity as exactly {dim} comma-separated numbers in [0, 1].",
            user_prompt=text,
            schema_hint=SchemaHint("feature-vector", dim),
        )
        for _ in range(2):
            resp = self.complete(req)
            if resp.parsed is not None:
                return resp.parsed
        raise SchemaError(f"could not parse a {dim}-dim feature vector")
