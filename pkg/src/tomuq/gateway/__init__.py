"""Model and embedding backends, prompt construction, parsing, caching."""

from tomuq.gateway.backends import (
    CompletionBackend,
    EmbeddingBackend,
    FeatureVector,
    ForecastSample,
    OpenAICompatibleBackend,
    OpenAICompatibleEmbeddingBackend,
    SamplingOptions,
    TransportError,
    complete,
    embed,
)
from tomuq.gateway.cache import ResponseCache
from tomuq.gateway.parsing import parse_certainty
from tomuq.gateway.prompts import (
    STEP_BY_STEP_SUFFIX,
    SYSTEM_PROMPT,
    PromptBundle,
    PromptTask,
    build_prompt,
)
from tomuq.gateway.synthetic import (
    SyntheticCompletionBackend,
    SyntheticEmbeddingBackend,
    TruthRow,
)

__all__ = [
    "CompletionBackend",
    "EmbeddingBackend",
    "FeatureVector",
    "ForecastSample",
    "OpenAICompatibleBackend",
    "OpenAICompatibleEmbeddingBackend",
    "PromptBundle",
    "PromptTask",
    "ResponseCache",
    "STEP_BY_STEP_SUFFIX",
    "SYSTEM_PROMPT",
    "SamplingOptions",
    "SyntheticCompletionBackend",
    "SyntheticEmbeddingBackend",
    "TransportError",
    "TruthRow",
    "build_prompt",
    "complete",
    "embed",
    "parse_certainty",
]
