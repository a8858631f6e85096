"""Map Likert belief annotations to probabilities via corpus exceedance.

A rating ``m`` for a question is calibrated to the probability that ``m``
exceeds a rating drawn at random from the whole corpus for that question.
Ties carry half weight (midrank), which keeps probabilities strictly
inside (0, 1) whenever the rating itself belongs to the pool.  A strict
counting mode (ties count as not-exceeded) is available for sensitivity
analysis.

Self-reports (or third-party labels, when no self-reports exist for a
question) define the ground-truth side of each target; perception ratings
are calibrated against the same pool and define the forecast side.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tomuq.corpus import DialogueRecord, LikertAnnotation, Perspective
from tomuq.errors import CalibrationError


@dataclass(frozen=True)
class ExceedancePool:
    """All comparable rating values for one question across the corpus."""

    question_key: str
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise CalibrationError(
                f"empty exceedance pool for question {self.question_key!r}"
            )
        if not all(np.isfinite(self.values)):
            raise CalibrationError(
                f"non-finite value in pool for question {self.question_key!r}"
            )


@dataclass(frozen=True)
class CalibratedTarget:
    """Ground-truth and forecast probabilities for one (dialogue, question).

    ``false_uncertainty`` is forecast - ground_truth, present only when
    both sides exist; it lies in [-1, 1].
    """

    dialogue_id: str
    question_key: str
    outcome_statement: str
    ground_truth: float | None = None
    forecast: float | None = None
    false_uncertainty: float | None = None


def _matching(
    record: DialogueRecord, question_key: str, perspective: Perspective
) -> list[LikertAnnotation]:
    return [
        a
        for a in record.annotations
        if a.question_key == question_key and a.perspective == perspective
    ]


def build_pool(
    records: list[DialogueRecord],
    question_key: str,
    perspective: Perspective | str,
) -> ExceedancePool:
    """Collect one pool value per (dialogue, rater) for the given question.

    Third-party ratings are first averaged into a single value per
    dialogue, so crowd-sourced labels contribute one number each.
    """
    perspective = Perspective(perspective)
    values: list[float] = []
    for record in records:
        matches = _matching(record, question_key, perspective)
        if not matches:
            continue
        if perspective is Perspective.THIRD_PARTY:
            values.append(float(np.mean([a.value for a in matches])))
        else:
            values.extend(float(a.value) for a in matches)
    if not values:
        raise CalibrationError(
            f"no {perspective.value} annotations for question {question_key!r}"
        )
    return ExceedancePool(question_key=question_key, values=tuple(values))


def exceedance_probability(
    value: float, pool: ExceedancePool, strict: bool = False
) -> float:
    """Probability that ``value`` exceeds a random draw from the pool.

    The default midrank convention gives ties half weight:
    (#below + 0.5 * #equal) / pool size.  With ``strict=True`` ties count
    as not exceeded.
    """
    arr = np.asarray(pool.values, dtype=np.float64)
    below = int(np.count_nonzero(arr < value))
    equal = int(np.count_nonzero(arr == value))
    if strict:
        return below / arr.size
    return (below + 0.5 * equal) / arr.size


def _ground_truth_perspective(
    records: list[DialogueRecord], question_key: str
) -> Perspective:
    """Self-reports define ground truth when present; otherwise third-party
    (averaged) labels stand in for it."""
    for record in records:
        if _matching(record, question_key, Perspective.SELF_REPORT):
            return Perspective.SELF_REPORT
    return Perspective.THIRD_PARTY


def _pick_subject(annotations: list[LikertAnnotation], dialogue_id: str) -> str:
    subjects = sorted({a.subject_id for a in annotations})
    if len(subjects) > 1:
        warnings.warn(
            f"dialogue {dialogue_id!r}: multiple annotated subjects "
            f"{subjects}; using {subjects[0]!r}",
            stacklevel=3,
        )
    return subjects[0]


def calibrate_corpus(
    records: list[DialogueRecord],
    question_key: str,
    strict: bool = False,
) -> list[CalibratedTarget]:
    """Produce one target per dialogue that has annotations for the question.

    The ground-truth probability comes from the dialogue's self-report
    (or averaged third-party label); the forecast probability comes from
    a perception rating of the same subject, calibrated against the same
    ground-truth pool.
    """
    gt_perspective = _ground_truth_perspective(records, question_key)
    pool = build_pool(records, question_key, gt_perspective)
    readable = question_key.replace("_", " ")
    targets: list[CalibratedTarget] = []
    for record in records:
        gt_matches = _matching(record, question_key, gt_perspective)
        perc_matches = _matching(record, question_key, Perspective.PERCEPTION_OF_OTHER)
        if not gt_matches and not perc_matches:
            continue

        ground_truth = None
        subject = None
        if gt_matches:
            subject = _pick_subject(gt_matches, record.id)
            chosen = [a for a in gt_matches if a.subject_id == subject]
            if gt_perspective is Perspective.THIRD_PARTY:
                rating = float(np.mean([a.value for a in chosen]))
            else:
                rating = float(sorted(chosen, key=lambda a: a.rater_id)[0].value)
            ground_truth = exceedance_probability(rating, pool, strict=strict)

        forecast = None
        if perc_matches:
            if subject is not None:
                same_subject = [a for a in perc_matches if a.subject_id == subject]
            else:
                same_subject = perc_matches
                subject = _pick_subject(perc_matches, record.id)
            if same_subject:
                perc = sorted(same_subject, key=lambda a: a.rater_id)[0]
                forecast = exceedance_probability(float(perc.value), pool, strict=strict)

        fun = None
        if ground_truth is not None and forecast is not None:
            fun = forecast - ground_truth
        targets.append(
            CalibratedTarget(
                dialogue_id=record.id,
                question_key=question_key,
                outcome_statement=(
                    f"whether {subject}'s {readable} is higher than would occur by chance"
                ),
                ground_truth=ground_truth,
                forecast=forecast,
                false_uncertainty=fun,
            )
        )
    return targets


def brier_score(forecast: float, outcome: int) -> float:
    """Squared error of a probability forecast against a binary outcome."""
    if outcome not in (0, 1):
        raise CalibrationError(f"outcome must be 0 or 1, got {outcome!r}")
    if not 0.0 <= forecast <= 1.0:
        raise CalibrationError(f"forecast must lie in [0, 1], got {forecast!r}")
    return (forecast - outcome) ** 2


def save_targets(targets: list[CalibratedTarget], path: str | Path) -> None:
    """Export targets as line-delimited {dialogue_id, question_key, p, P, fun}."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for t in targets:
            fh.write(
                json.dumps(
                    {
                        "dialogue_id": t.dialogue_id,
                        "question_key": t.question_key,
                        "p": t.ground_truth,
                        "P": t.forecast,
                        "fun": t.false_uncertainty,
                    },
                    sort_keys=True,
                )
            )
            fh.write("\n")


def load_targets(path: str | Path) -> list[CalibratedTarget]:
    """Read targets written by :func:`save_targets`."""
    targets = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            targets.append(
                CalibratedTarget(
                    dialogue_id=obj["dialogue_id"],
                    question_key=obj["question_key"],
                    outcome_statement="",
                    ground_truth=obj.get("p"),
                    forecast=obj.get("P"),
                    false_uncertainty=obj.get("fun"),
                )
            )
    return targets
