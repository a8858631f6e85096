"""Self-contained synthetic worlds for offline runs and quantitative tests.

A world fixes, per dialogue, the three true quantities the pipeline is
supposed to recover: the ground-truth outcome probability, the
interlocutor's forecast of it, and their difference.  Likert annotations
are emitted so that exceedance calibration reconstructs those values
exactly: self-report ratings are the ranks of the raw ground-truth draws
(so the midrank of rating r in the pool 1..n is exactly (r - 0.5) / n),
and perception ratings are the forecast draws quantized onto the same
1..n grid.  The true values are *defined* on that grid, which folds the
quantization error (at most 1/(2n)) into the targets themselves.

The gateway's synthetic backends answer prompts from the same truth
table, so end-to-end runs have known signal.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from tomuq.corpus import (
    CorpusTag,
    DemographicProfile,
    DialogueRecord,
    LikertAnnotation,
    Perspective,
)
from tomuq.errors import ConfigError
from tomuq.gateway.synthetic import (
    SyntheticCompletionBackend,
    SyntheticEmbeddingBackend,
    TruthRow,
)

QUESTION_KEY = "likes_partner"

_TURN_POOL = [
    "Hey, it is good to finally talk.",
    "Likewise, I was looking forward to this.",
    "How has your week been going?",
    "Busy, but I cannot really complain.",
    "Do you get outside much these days?",
    "Mostly on weekends, when it is quiet.",
    "That sounds like a decent routine.",
    "What about you, any plans coming up?",
    "A short trip, if the weather holds.",
    "I hope it works out for you.",
]
_SEXES = ["female", "male"]
_RACES = ["Asian", "Black", "Hispanic", "White"]
_EDUCATIONS = ["high school", "college", "graduate"]


@dataclass
class SyntheticWorld:
    """Parameters, per-dialogue truths, and the emitted corpus."""

    seed: int
    n_dialogues: int
    sigma: float
    fun_std: float
    embedding_dim: int
    embedding_mode: str
    signal_sigma: float
    truths: dict[str, TruthRow] = field(default_factory=dict)
    records: list[DialogueRecord] = field(default_factory=list)

    def tag(self) -> str:
        payload = json.dumps(
            {
                "seed": self.seed,
                "n": self.n_dialogues,
                "sigma": self.sigma,
                "fun_std": self.fun_std,
                "dim": self.embedding_dim,
                "mode": self.embedding_mode,
                "signal_sigma": self.signal_sigma,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:10]

    def completion_backend(self) -> SyntheticCompletionBackend:
        return SyntheticCompletionBackend(
            self.truths, sigma=self.sigma, seed=self.seed, world_tag=self.tag()
        )

    def embedding_backend(self) -> SyntheticEmbeddingBackend:
        return SyntheticEmbeddingBackend(
            self.truths,
            seed=self.seed,
            dim=self.embedding_dim,
            mode=self.embedding_mode,
            signal_sigma=self.signal_sigma,
            world_tag=self.tag(),
        )

    def save(self, directory: str | Path) -> None:
        """Write the corpus plus a truth-table sidecar for inspection."""
        from tomuq.corpus import save_corpus

        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        save_corpus(self.records, directory / "corpus.jsonl")
        payload = {
            "seed": self.seed,
            "n_dialogues": self.n_dialogues,
            "sigma": self.sigma,
            "fun_std": self.fun_std,
            "embedding_dim": self.embedding_dim,
            "embedding_mode": self.embedding_mode,
            "signal_sigma": self.signal_sigma,
            "truths": {
                did: {
                    "p": row.ground_truth,
                    "P": row.forecast,
                    "fun": row.false_uncertainty,
                    "nuisance": row.nuisance,
                }
                for did, row in sorted(self.truths.items())
            },
        }
        (directory / "world.json").write_text(json.dumps(payload, indent=2, sort_keys=True))


def synth_world(
    seed: int,
    n_dialogues: int,
    sigma: float,
    fun_std: float = 0.15,
    embedding_dim: int = 768,
    embedding_mode: str = "side_signal",
    signal_sigma: float = 0.05,
) -> SyntheticWorld:
    """Generate a deterministic world of annotated template dialogues."""
    if n_dialogues < 4:
        raise ConfigError("a synthetic world needs at least 4 dialogues")
    rng = np.random.default_rng(seed)
    n = n_dialogues

    forecast_raw = rng.uniform(0.05, 1.0, size=n)
    fun_raw = rng.normal(0.0, fun_std, size=n)
    truth_raw = np.clip(forecast_raw - fun_raw, 0.0, 1.0)

    # self-report ratings are the 1-based ranks of the raw truths
    self_ratings = np.argsort(np.argsort(truth_raw, kind="stable"), kind="stable") + 1
    ground_truth = (self_ratings - 0.5) / n

    # perception ratings quantize the forecast draw onto the same grid,
    # floored so every true forecast stays >= 0.05 (10-point compatible)
    lowest = math.ceil(0.05 * n + 0.5)
    perception_ratings = np.clip(
        np.round(n * forecast_raw + 0.5).astype(int), lowest, n
    )
    forecast = (perception_ratings - 0.5) / n
    false_uncertainty = forecast - ground_truth
    nuisances = rng.uniform(0.0, 1.0, size=n)

    world = SyntheticWorld(
        seed=seed,
        n_dialogues=n,
        sigma=sigma,
        fun_std=fun_std,
        embedding_dim=embedding_dim,
        embedding_mode=embedding_mode,
        signal_sigma=signal_sigma,
    )
    for i in range(n):
        dialogue_id = f"synth-{i:05d}"
        n_turns = int(rng.integers(2, 7))
        start = int(rng.integers(0, len(_TURN_POOL)))
        turns = [
            ("s1" if t % 2 == 0 else "s2", _TURN_POOL[(start + t) % len(_TURN_POOL)])
            for t in range(n_turns)
        ]
        speakers = {
            sid: DemographicProfile(
                age=int(rng.integers(19, 78)),
                sex=_SEXES[int(rng.integers(0, len(_SEXES)))],
                race=_RACES[int(rng.integers(0, len(_RACES)))],
                education=_EDUCATIONS[int(rng.integers(0, len(_EDUCATIONS)))],
            )
            for sid in ("s1", "s2")
        }
        annotations = [
            LikertAnnotation(
                question_key=QUESTION_KEY,
                rater_id="s2",
                subject_id="s2",
                value=int(self_ratings[i]),
                scale_min=1,
                scale_max=n,
                perspective=Perspective.SELF_REPORT,
            ),
            LikertAnnotation(
                question_key=QUESTION_KEY,
                rater_id="s1",
                subject_id="s2",
                value=int(perception_ratings[i]),
                scale_min=1,
                scale_max=n,
                perspective=Perspective.PERCEPTION_OF_OTHER,
            ),
        ]
        world.records.append(
            DialogueRecord(
                id=dialogue_id,
                corpus_tag=CorpusTag.SYNTHETIC,
                turns=turns,
                speakers=speakers,
                annotations=annotations,
            )
        )
        world.truths[dialogue_id] = TruthRow(
            ground_truth=float(ground_truth[i]),
            forecast=float(forecast[i]),
            false_uncertainty=float(false_uncertainty[i]),
            nuisance=float(nuisances[i]),
        )
    return world
