"""Dialogue corpus loading, validation, rendering, and train/test splitting.

Corpora live on disk as UTF-8 line-delimited JSON.  Each line is one
dialogue object with fields exactly::

    id          unique string
    corpus_tag  one of "negotiation", "social", "task_oriented", "synthetic"
    turns       array of {"speaker": str, "text": str}, in order
    speakers    object speaker_id -> {"age", "sex", "race", "education"}
    annotations array of {"question_key", "rater_id", "subject_id",
                          "value", "scale_min", "scale_max", "perspective"}

Rater and subject ids must name a speaker of the dialogue, or the reserved
id "annotator" for third-party labels.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from tomuq.errors import CorpusError

RESERVED_ANNOTATOR_ID = "annotator"


class CorpusTag(str, Enum):
    NEGOTIATION = "negotiation"
    SOCIAL = "social"
    TASK_ORIENTED = "task_oriented"
    SYNTHETIC = "synthetic"


class Perspective(str, Enum):
    SELF_REPORT = "self_report"
    PERCEPTION_OF_OTHER = "perception_of_other"
    THIRD_PARTY = "third_party"


@dataclass(frozen=True)
class DemographicProfile:
    """Optional background attributes of one speaker."""

    age: int | None = None
    sex: str | None = None
    race: str | None = None
    education: str | None = None

    def is_empty(self) -> bool:
        return all(v is None for v in (self.age, self.sex, self.race, self.education))


@dataclass(frozen=True)
class LikertAnnotation:
    """One integer belief-intensity rating on a bounded scale.

    ``rater_id`` is who produced the rating; ``subject_id`` is whose belief
    the rating is about.  A self-report has rater == subject; a perception
    has a rater judging someone else's belief.
    """

    question_key: str
    rater_id: str
    subject_id: str
    value: int
    scale_min: int
    scale_max: int
    perspective: Perspective

    def __post_init__(self) -> None:
        object.__setattr__(self, "perspective", Perspective(self.perspective))


@dataclass
class DialogueRecord:
    """One conversation with turns, speaker profiles, and annotations."""

    id: str
    corpus_tag: CorpusTag
    turns: list[tuple[str, str]]
    speakers: dict[str, DemographicProfile] = field(default_factory=dict)
    annotations: list[LikertAnnotation] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.corpus_tag = CorpusTag(self.corpus_tag)

    def speaker_ids(self) -> list[str]:
        """Distinct speaker ids, in order of first appearance in the turns."""
        seen: list[str] = []
        for speaker, _ in self.turns:
            if speaker not in seen:
                seen.append(speaker)
        for speaker in self.speakers:
            if speaker not in seen:
                seen.append(speaker)
        return seen


@dataclass(frozen=True)
class SplitSpec:
    """A deterministic train/test partition of dialogue ids."""

    seed: int
    train_ids: frozenset[str]
    test_ids: frozenset[str]
    train_n: int


def validate_record(record: DialogueRecord) -> None:
    """Check all per-record invariants, raising CorpusError on the first failure."""
    if not record.id:
        raise CorpusError("dialogue id must be non-empty")
    if not record.turns:
        raise CorpusError(f"dialogue {record.id!r}: turns must be non-empty")
    known = set(record.speaker_ids()) | {RESERVED_ANNOTATOR_ID}
    for ann in record.annotations:
        if ann.scale_max <= ann.scale_min:
            raise CorpusError(
                f"dialogue {record.id!r}: scale_max must exceed scale_min "
                f"for question {ann.question_key!r}"
            )
        if not ann.scale_min <= ann.value <= ann.scale_max:
            raise CorpusError(
                f"dialogue {record.id!r}: value out of scale "
                f"({ann.value} not in [{ann.scale_min}, {ann.scale_max}]) "
                f"for question {ann.question_key!r}"
            )
        for role, sid in (("rater_id", ann.rater_id), ("subject_id", ann.subject_id)):
            if sid not in known:
                raise CorpusError(
                    f"dialogue {record.id!r}: {role} {sid!r} is not a dialogue "
                    f"speaker or the reserved id {RESERVED_ANNOTATOR_ID!r}"
                )


def _record_from_json(obj: dict, line_no: int) -> DialogueRecord:
    def fail(field_name: str, why: str) -> CorpusError:
        return CorpusError(f"line {line_no}: field {field_name!r}: {why}")

    if not isinstance(obj, dict):
        raise CorpusError(f"line {line_no}: expected a JSON object")
    try:
        tag = CorpusTag(obj.get("corpus_tag"))
    except ValueError:
        raise fail("corpus_tag", f"unknown tag {obj.get('corpus_tag')!r}") from None

    raw_turns = obj.get("turns")
    if not isinstance(raw_turns, list):
        raise fail("turns", "must be an array")
    turns: list[tuple[str, str]] = []
    for t in raw_turns:
        if not isinstance(t, dict) or "speaker" not in t or "text" not in t:
            raise fail("turns", "each turn needs 'speaker' and 'text'")
        turns.append((str(t["speaker"]), str(t["text"])))

    speakers: dict[str, DemographicProfile] = {}
    for sid, prof in (obj.get("speakers") or {}).items():
        if prof is None:
            prof = {}
        if not isinstance(prof, dict):
            raise fail("speakers", f"profile for {sid!r} must be an object")
        age = prof.get("age")
        if age is not None:
            if not isinstance(age, int) or not 0 <= age <= 130:
                raise fail("speakers", f"age {age!r} for {sid!r} not in [0, 130]")
        speakers[str(sid)] = DemographicProfile(
            age=age,
            sex=prof.get("sex"),
            race=prof.get("race"),
            education=prof.get("education"),
        )

    annotations: list[LikertAnnotation] = []
    for a in obj.get("annotations") or []:
        try:
            annotations.append(
                LikertAnnotation(
                    question_key=str(a["question_key"]),
                    rater_id=str(a["rater_id"]),
                    subject_id=str(a["subject_id"]),
                    value=int(a["value"]),
                    scale_min=int(a["scale_min"]),
                    scale_max=int(a["scale_max"]),
                    perspective=Perspective(a["perspective"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise fail("annotations", str(exc)) from None

    record = DialogueRecord(
        id=str(obj.get("id", "")),
        corpus_tag=tag,
        turns=turns,
        speakers=speakers,
        annotations=annotations,
    )
    try:
        validate_record(record)
    except CorpusError as exc:
        raise CorpusError(f"line {line_no}: {exc}") from None
    return record


def record_to_json(record: DialogueRecord) -> dict:
    """Serialize one record to the on-disk object shape."""
    return {
        "id": record.id,
        "corpus_tag": record.corpus_tag.value,
        "turns": [{"speaker": s, "text": t} for s, t in record.turns],
        "speakers": {
            sid: {
                "age": prof.age,
                "sex": prof.sex,
                "race": prof.race,
                "education": prof.education,
            }
            for sid, prof in record.speakers.items()
        },
        "annotations": [
            {
                "question_key": a.question_key,
                "rater_id": a.rater_id,
                "subject_id": a.subject_id,
                "value": a.value,
                "scale_min": a.scale_min,
                "scale_max": a.scale_max,
                "perspective": a.perspective.value,
            }
            for a in record.annotations
        ],
    }


def load_corpus(path: str | Path, expected_tag: CorpusTag | str) -> list[DialogueRecord]:
    """Load and validate a line-delimited corpus file.

    Every record must carry ``expected_tag`` and satisfy the type
    invariants; ids must be unique.  An empty file is valid but warns.
    """
    expected = CorpusTag(expected_tag)
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    records: list[DialogueRecord] = []
    seen_ids: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON: {exc}") from None
            record = _record_from_json(obj, line_no)
            if record.corpus_tag is not expected:
                raise CorpusError(
                    f"line {line_no}: field 'corpus_tag': got "
                    f"{record.corpus_tag.value!r}, expected {expected.value!r}"
                )
            if record.id in seen_ids:
                raise CorpusError(f"line {line_no}: duplicate id {record.id!r}")
            seen_ids.add(record.id)
            records.append(record)
    if not records:
        warnings.warn(f"corpus file {path} contains no records", stacklevel=2)
    return records


def save_corpus(records: list[DialogueRecord], path: str | Path) -> None:
    """Write records in file order as line-delimited JSON (load round-trips)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_json(record), sort_keys=True, ensure_ascii=False))
            fh.write("\n")


def make_split(records: list[DialogueRecord], seed: int, train_n: int) -> SplitSpec:
    """Uniform train/test split without replacement, a pure function of
    (sorted ids, seed, train_n)."""
    ids = sorted(r.id for r in records)
    if train_n >= len(ids):
        raise CorpusError(
            f"train_n={train_n} must be smaller than the corpus size ({len(ids)})"
        )
    if train_n < 0:
        raise CorpusError("train_n must be non-negative")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    train = frozenset(ids[i] for i in order[:train_n])
    test = frozenset(ids[i] for i in order[train_n:])
    return SplitSpec(seed=seed, train_ids=train, test_ids=test, train_n=train_n)


def speaker_labels(record: DialogueRecord) -> dict[str, str]:
    """Stable pseudonyms for prompt and transcript rendering.

    Task-oriented dialogues use "User"/"Assistant"; everything else gets
    "Speaker A", "Speaker B", ... in sorted-id order.
    """
    ids = sorted(record.speaker_ids())
    if record.corpus_tag is CorpusTag.TASK_ORIENTED:
        labels: dict[str, str] = {}
        remaining = []
        for sid in ids:
            low = sid.lower()
            if low in ("user", "usr", "customer") and "User" not in labels.values():
                labels[sid] = "User"
            elif low in ("assistant", "system", "sys", "wizard") and "Assistant" not in labels.values():
                labels[sid] = "Assistant"
            else:
                remaining.append(sid)
        for sid in remaining:
            labels[sid] = "User" if "User" not in labels.values() else "Assistant"
        return labels
    alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    return {sid: f"Speaker {alphabet[i % 26]}" for i, sid in enumerate(ids)}


def render_transcript(record: DialogueRecord, char_budget: int = 20_000) -> str:
    """Render turns as "Label: text" lines, truncated at whole turns.

    Turns are kept while the cumulative rendered length stays within
    ``char_budget``.  If the very first turn alone exceeds the budget, it
    is hard-cut at ``char_budget`` characters instead.
    """
    if char_budget <= 0:
        raise CorpusError("char_budget must be positive")
    labels = speaker_labels(record)
    lines = [f"{labels[speaker]}: {text}" for speaker, text in record.turns]
    kept: list[str] = []
    used = 0
    for line in lines:
        cost = len(line) + (1 if kept else 0)  # newline separator
        if used + cost > char_budget:
            break
        kept.append(line)
        used += cost
    if not kept:
        return lines[0][:char_budget]
    return "\n".join(kept)


def render_demographics(profile: DemographicProfile, speaker_label: str) -> str:
    """One declarative sentence listing present fields in age, sex, race,
    education order; empty profile renders as the empty string."""
    if profile.is_empty():
        return ""
    segments: list[str] = []
    if profile.age is not None and profile.sex is not None:
        segments.append(f"a {profile.age}-year-old {profile.sex}")
    elif profile.age is not None:
        segments.append(f"{profile.age} years old")
    elif profile.sex is not None:
        segments.append(f"a {profile.sex}")
    if profile.race is not None:
        segments.append(profile.race)
    if profile.education is not None:
        article = "an" if profile.education[:1].lower() in "aeiou" else "a"
        segments.append(f"with {article} {profile.education} education")
    return f"{speaker_label} is {' '.join(segments)}."
