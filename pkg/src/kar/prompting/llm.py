"""LLM clients: an OpenAI-style chat-completion HTTP client and an offline stub."""

from __future__ import annotations

import hashlib
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import KarError
from .templates import MOVIE_FACTORS

log = logging.getLogger(__name__)

DEFAULT_TOKEN_ENV = "KAR_LLM_TOKEN"
DEFAULT_MAX_TOKENS = 1024


class GenerationError(KarError):
    pass


class TransportError(GenerationError):
    """Retryable: connection problems and 5xx responses."""


class RateLimitError(TransportError):
    def __init__(self, message, retry_after=None):
        super().__init__(message)
        self.retry_after = retry_after


class EmptyKnowledgeError(GenerationError):
    pass


@dataclass
class RetryPolicy:
    """``max_retries`` is the total number of calls made before giving up."""

    max_retries: int = 4
    base_delay: float = 1.0
    backoff: float = 2.0
    max_delay: float = 60.0
    sleep: Callable[[float], None] = field(default=time.sleep, repr=False)

    def delay(self, attempt, exc=None):
        d = min(self.base_delay * self.backoff**attempt, self.max_delay)
        if isinstance(exc, RateLimitError) and exc.retry_after:
            d = max(d, float(exc.retry_after))
        return d

    def run(self, fn):
        attempts = max(1, self.max_retries)
        last = None
        for attempt in range(attempts):
            try:
                return fn()
            except TransportError as exc:
                last = exc
                if attempt + 1 < attempts:
                    wait = self.delay(attempt, exc)
                    log.warning("LLM call failed (%s); retry %d/%d in %.1fs",
                                exc, attempt + 1, attempts - 1, wait)
                    self.sleep(wait)
        kind = "rate limited" if isinstance(last, RateLimitError) else "transport failure"
        raise GenerationError(f"{kind} after {attempts} attempt(s): {last}") from last


class HTTPChatClient:
    provenance = "live_llm"

    def __init__(self, base_url, model, token_env=DEFAULT_TOKEN_ENV, temperature=0.0,
                 max_tokens=DEFAULT_MAX_TOKENS, timeout=60.0, session=None):
        import requests

        self.url = base_url.rstrip("/") + "/chat/completions"
        self.model = model
        self.token_env = token_env
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.timeout = timeout
        self._requests = requests
        self.session = session or requests.Session()

    def request_body(self, prompt):
        return {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }

    def complete(self, prompt):
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            resp = self.session.post(self.url, json=self.request_body(prompt),
                                     headers=headers, timeout=self.timeout)
        except self._requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code == 429:
            raise RateLimitError("HTTP 429", resp.headers.get("Retry-After"))
        if resp.status_code >= 500:
            raise TransportError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise GenerationError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise GenerationError(f"malformed completion response: {resp.text[:200]}") from exc


_WORDS = (
    "classic drama comedy thriller romance epic quiet bold acclaimed indie dark light "
    "witty tense warm nostalgic stylish gritty uplifting cerebral visual emotional "
    "veteran ensemble auteur blockbuster subtle vivid layered polished raw iconic modern "
    "vintage heartfelt playful haunting sweeping intimate satirical moody bright"
).split()


class StubLLM:
    """Deterministic offline stand-in.

    Answers the factor-elicitation question with a numbered list of
    ``factors``; any other prompt yields pseudo-text seeded by the prompt's
    hash with one sentence per factor.
    """

    provenance = "stub"

    def __init__(self, factors=MOVIE_FACTORS, responder=None, words_per_factor=8):
        self.factors = tuple(factors)
        self.responder = responder
        self.words_per_factor = words_per_factor
        self.calls = 0

    def complete(self, prompt):
        self.calls += 1
        if self.responder is not None:
            return self.responder(prompt)
        if prompt.startswith("List the important factors"):
            return "\n".join(f"{i}. {f}" for i, f in enumerate(self.factors, 1))
        seed = int.from_bytes(hashlib.sha256(prompt.encode("utf-8")).digest()[:8], "little")
        rng = np.random.default_rng(seed)
        lines = []
        for f in self.factors:
            words = rng.choice(_WORDS, size=self.words_per_factor)
            lines.append(f"{f}: " + " ".join(words) + ".")
        return "\n".join(lines)
