"""Completion and embedding backends plus the sampling/caching front door.

Backends expose two duck-typed surfaces:

* completion backends: ``backend_id`` attribute and
  ``generate(prompt, sample_index, attempt, options) -> str``
* embedding backends: ``backend_id`` attribute and
  ``encode(prompt) -> np.ndarray``

:func:`complete` and :func:`embed` wrap them with parsing, retries, and
the content-addressed cache.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from tomuq.errors import BackendError, CertaintyParseError
from tomuq.gateway.cache import ResponseCache, completion_key, embedding_key
from tomuq.gateway.parsing import parse_certainty
from tomuq.gateway.prompts import PromptBundle

API_BASE_ENV = "TOMUQ_API_BASE"
API_KEY_ENV = "TOMUQ_API_KEY"


@dataclass(frozen=True)
class SamplingOptions:
    temperature: float = 1.0
    max_new_tokens: int = 256
    n_samples: int = 1
    retry_limit: int = 3

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise BackendError("temperature must be non-negative")
        if self.n_samples < 1:
            raise BackendError("n_samples must be at least 1")
        if self.retry_limit < 0:
            raise BackendError("retry_limit must be non-negative")

    def tag(self) -> str:
        """Cache discriminator: completions depend on these knobs."""
        return f"T={self.temperature:g};M={self.max_new_tokens}"


@dataclass(frozen=True)
class ForecastSample:
    """One parsed model completion."""

    raw_text: str
    parsed: float | None
    valid: bool
    sample_index: int
    backend_id: str


@dataclass(frozen=True)
class FeatureVector:
    """A fixed-length embedding of one prompt."""

    values: np.ndarray
    dim: int
    backend_id: str

    def __post_init__(self) -> None:
        if self.values.shape != (self.dim,):
            raise BackendError(
                f"feature vector shape {self.values.shape} != ({self.dim},)"
            )
        if not np.all(np.isfinite(self.values)):
            raise BackendError("feature vector contains non-finite values")


@runtime_checkable
class CompletionBackend(Protocol):
    backend_id: str

    def generate(
        self, prompt: PromptBundle, sample_index: int, attempt: int, options: SamplingOptions
    ) -> str: ...


@runtime_checkable
class EmbeddingBackend(Protocol):
    backend_id: str

    def encode(self, prompt: PromptBundle) -> np.ndarray: ...


class TransportError(BackendError):
    """A retryable transport-level failure."""


def complete(
    prompt: PromptBundle,
    sampling: SamplingOptions,
    backend: CompletionBackend,
    cache: ResponseCache | None = None,
) -> list[ForecastSample]:
    """Draw ``n_samples`` completions, parsing each one.

    Unparseable completions are re-requested up to ``retry_limit`` times
    and then recorded with ``valid=False``.  Transport failures are
    retried the same number of times and then raised.  The cache is
    consulted before any backend call and stores the final resolved text
    per sample index, so warm-cache calls are byte-identical with zero
    backend traffic.
    """
    samples: list[ForecastSample] = []
    for index in range(sampling.n_samples):
        key = completion_key(backend.backend_id, prompt.fingerprint, index, sampling.tag())
        text = cache.get_text(key) if cache is not None else None
        if text is None:
            text = _resolve_sample(prompt, index, sampling, backend)
            if cache is not None:
                cache.put_text(key, text)
        try:
            parsed: float | None = parse_certainty(text)
            valid = True
        except CertaintyParseError:
            parsed, valid = None, False
        samples.append(
            ForecastSample(
                raw_text=text,
                parsed=parsed,
                valid=valid,
                sample_index=index,
                backend_id=backend.backend_id,
            )
        )
    return samples


def _resolve_sample(
    prompt: PromptBundle, index: int, sampling: SamplingOptions, backend: CompletionBackend
) -> str:
    text = ""
    for attempt in range(sampling.retry_limit + 1):
        try:
            text = backend.generate(prompt, index, attempt, sampling)
        except TransportError as exc:
            if attempt == sampling.retry_limit:
                raise BackendError(
                    f"transport failure for sample {index} after "
                    f"{sampling.retry_limit} retries: {exc}"
                ) from exc
            continue
        try:
            parse_certainty(text)
            return text
        except CertaintyParseError:
            continue  # re-request; keep the last text if retries run out
    return text


def embed(
    prompt: PromptBundle,
    backend: EmbeddingBackend,
    cache: ResponseCache | None = None,
    retry_limit: int = 3,
) -> FeatureVector:
    """Encode a prompt, deterministic per (backend_id, fingerprint)."""
    key = embedding_key(backend.backend_id, prompt.fingerprint)
    values = cache.get_vector(key) if cache is not None else None
    if values is None:
        for attempt in range(retry_limit + 1):
            try:
                values = np.asarray(backend.encode(prompt), dtype=np.float64)
                break
            except TransportError as exc:
                if attempt == retry_limit:
                    raise BackendError(
                        f"transport failure while embedding after "
                        f"{retry_limit} retries: {exc}"
                    ) from exc
        if cache is not None:
            cache.put_vector(key, values)
    return FeatureVector(values=values, dim=values.size, backend_id=backend.backend_id)


class OpenAICompatibleBackend:
    """Live chat-completions backend speaking the OpenAI wire format.

    Base URL and key come from ``TOMUQ_API_BASE`` / ``TOMUQ_API_KEY``
    unless passed explicitly.  Requests are rate limited to one per
    ``min_interval`` seconds.
    """

    def __init__(
        self,
        model: str,
        base_url: str | None = None,
        api_key: str | None = None,
        timeout: float = 60.0,
        min_interval: float = 0.0,
        session=None,
    ):
        self.model = model
        self.base_url = (base_url or os.environ.get(API_BASE_ENV, "")).rstrip("/")
        if not self.base_url:
            raise BackendError(f"no API base URL; set {API_BASE_ENV}")
        self.api_key = api_key or os.environ.get(API_KEY_ENV, "")
        self.timeout = timeout
        self.min_interval = min_interval
        self.backend_id = f"openai:{model}"
        if session is None:
            import requests

            session = requests.Session()
        self._session = session
        self._lock = threading.Lock()
        self._last_request = 0.0

    def _throttle(self) -> None:
        if self.min_interval <= 0:
            return
        with self._lock:
            wait = self._last_request + self.min_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last_request = time.monotonic()

    def _post(self, path: str, payload: dict) -> dict:
        self._throttle()
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = self._session.post(
                f"{self.base_url}{path}", json=payload, headers=headers, timeout=self.timeout
            )
        except Exception as exc:  # connection errors, timeouts
            raise TransportError(str(exc)) from exc
        if response.status_code >= 500 or response.status_code == 429:
            raise TransportError(f"HTTP {response.status_code}")
        if response.status_code != 200:
            raise BackendError(f"HTTP {response.status_code}: {response.text[:200]}")
        return response.json()

    def generate(
        self, prompt: PromptBundle, sample_index: int, attempt: int, options: SamplingOptions
    ) -> str:
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
            "temperature": options.temperature,
            "max_tokens": options.max_new_tokens,
        }
        data = self._post("/chat/completions", payload)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed completion response: {exc}") from exc


class OpenAICompatibleEmbeddingBackend(OpenAICompatibleBackend):
    """Embeddings endpoint of the same wire format."""

    def __init__(self, model: str, **kwargs):
        super().__init__(model, **kwargs)
        self.backend_id = f"openai-emb:{model}"

    def encode(self, prompt: PromptBundle) -> np.ndarray:
        payload = {
            "model": self.model,
            "input": [prompt.system_text + "\n\n" + prompt.user_text],
        }
        data = self._post("/embeddings", payload)
        try:
            return np.asarray(data["data"][0]["embedding"], dtype=np.float64)
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed embedding response: {exc}") from exc
