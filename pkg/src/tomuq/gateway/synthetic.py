"""Deterministic offline backends driven by a known truth table.

The completion backend reports the dialogue's true target value plus
seeded Gaussian noise, rounded onto the 1-10 scale.  The embedding
backend returns a pseudo-random unit-scaled vector whose first coordinate
carries a recoverable signal.  Both are pure functions of their inputs,
so repeated calls (and concurrent callers) always agree.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from tomuq.errors import BackendError
from tomuq.gateway.backends import SamplingOptions
from tomuq.gateway.prompts import PromptBundle, PromptTask

COMPLETION_TEMPLATE = (
    "Considering the tone of the exchange and how the speakers respond to "
    "each other, the requested outcome looks moderately settled. "
    "CERTAINTY = {k}"
)

# which truth-table column answers each prompt task
_COMPLETION_TARGET = {
    PromptTask.ONE_TUQ: "ground_truth",
    PromptTask.TWO_TUQ: "forecast",
    PromptTask.FUNQ_WORLD_SIDE: "ground_truth",
}


@dataclass(frozen=True)
class TruthRow:
    """True per-dialogue targets the synthetic backends answer from."""

    ground_truth: float
    forecast: float
    false_uncertainty: float
    nuisance: float = 0.0


def _stream(*parts) -> np.random.Generator:
    digest = hashlib.sha256("||".join(str(p) for p in parts).encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


class SyntheticCompletionBackend:
    def __init__(self, truths: dict[str, TruthRow], sigma: float, seed: int, world_tag: str = ""):
        self.truths = truths
        self.sigma = sigma
        self.seed = seed
        self.backend_id = f"synth:{world_tag or seed}:sigma={sigma:g}"

    def generate(
        self, prompt: PromptBundle, sample_index: int, attempt: int, options: SamplingOptions
    ) -> str:
        row = self.truths.get(prompt.dialogue_id)
        if row is None:
            raise BackendError(f"unknown dialogue {prompt.dialogue_id!r}")
        target = getattr(row, _COMPLETION_TARGET[prompt.task])
        rng = _stream("completion", self.seed, prompt.fingerprint, sample_index, attempt)
        # temperature scales the sampling noise; greedy decoding is noiseless
        noise = rng.normal(0.0, self.sigma * options.temperature) if self.sigma > 0 else 0.0
        k = int(np.clip(np.round(10.0 * (target + noise)), 1, 10))
        return COMPLETION_TEMPLATE.format(k=k)


class SyntheticEmbeddingBackend:
    """Unit-scaled pseudo-random vectors with a planted signal coordinate.

    In "side_signal" mode coordinate 0 carries the prompt's own target
    plus noise.  In "joint_only" mode coordinate 0 carries a per-dialogue
    nuisance value (forecast-side prompts) or nuisance minus the true
    false uncertainty (world-side prompts), so the signal appears only
    when both prompts' vectors are combined.
    """

    def __init__(
        self,
        truths: dict[str, TruthRow],
        seed: int,
        dim: int = 768,
        mode: str = "side_signal",
        signal_sigma: float = 0.05,
        world_tag: str = "",
    ):
        if mode not in ("side_signal", "joint_only"):
            raise BackendError(f"unknown embedding mode {mode!r}")
        self.truths = truths
        self.seed = seed
        self.dim = dim
        self.mode = mode
        self.signal_sigma = signal_sigma
        self.backend_id = f"synth-emb:{world_tag or seed}:d={dim}:{mode}"

    def encode(self, prompt: PromptBundle) -> np.ndarray:
        row = self.truths.get(prompt.dialogue_id)
        if row is None:
            raise BackendError(f"unknown dialogue {prompt.dialogue_id!r}")
        rng = _stream("embedding", self.seed, prompt.fingerprint)
        vector = rng.standard_normal(self.dim) / np.sqrt(self.dim)
        if self.mode == "side_signal":
            target = getattr(row, _COMPLETION_TARGET[prompt.task])
            vector[0] = target + rng.normal(0.0, self.signal_sigma)
        else:
            if prompt.task is PromptTask.FUNQ_WORLD_SIDE:
                vector[0] = row.nuisance - row.false_uncertainty
            else:
                vector[0] = row.nuisance
            vector[0] += rng.normal(0.0, self.signal_sigma)
        return vector
