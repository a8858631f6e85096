"""Best-effort importers from public dialogue corpora to the native schema.

These converters cover the commonly distributed JSON shapes of three
public corpora; they are convenience scripts, not guaranteed parsers, and
skip items they cannot interpret (with a warning).  The output of every
adapter is a list of records ready for :func:`tomuq.corpus.save_corpus`.

Expected input shapes:

* negotiation ("casino"): a JSON array of dialogues with ``chat_logs``
  (list of {"text", "id"}) and ``participant_info`` mapping agent ids to
  {"outcomes": {"satisfaction": ...}, "demographics": {...}}.
  Satisfaction may be the published 5-point phrase or an integer.
* social ("candor", pre-extracted): a JSON array of
  {"id", "transcript": [{"speaker", "text"}], "surveys": {speaker_id:
  {"i_like_my_partner": 1-7, "partner_likes_me": 1-7}}}.
* task-oriented ("multiwoz", with satisfaction annotations): a JSON array
  of {"dialogue_id", "turns": [{"speaker", "text"}],
  "satisfaction_ratings": [ints on a 5-point scale]}.
"""

from __future__ import annotations

import json
import warnings
from pathlib import Path

from tomuq.corpus import (
    RESERVED_ANNOTATOR_ID,
    CorpusTag,
    DemographicProfile,
    DialogueRecord,
    LikertAnnotation,
    Perspective,
    validate_record,
)
from tomuq.errors import CorpusError

SATISFACTION_PHRASES = {
    "extremely dissatisfied": 1,
    "slightly dissatisfied": 2,
    "undecided": 3,
    "slightly satisfied": 4,
    "extremely satisfied": 5,
}


def _satisfaction_value(raw) -> int | None:
    if isinstance(raw, int):
        return raw
    if isinstance(raw, str):
        return SATISFACTION_PHRASES.get(raw.strip().lower())
    return None


def _profile(raw: dict | None) -> DemographicProfile:
    raw = raw or {}
    age = raw.get("age")
    return DemographicProfile(
        age=age if isinstance(age, int) else None,
        sex=raw.get("sex") or raw.get("gender"),
        race=raw.get("race") or raw.get("ethnicity"),
        education=raw.get("education"),
    )


def import_casino(items: list[dict]) -> list[DialogueRecord]:
    records = []
    for index, item in enumerate(items):
        turns = [
            (str(log.get("id", "unknown")), str(log.get("text", "")))
            for log in item.get("chat_logs", [])
            if log.get("text")
        ]
        if not turns:
            warnings.warn(f"casino item {index}: no usable turns, skipped")
            continue
        info = item.get("participant_info", {})
        speakers = {}
        annotations = []
        for agent_id, agent in info.items():
            speakers[str(agent_id)] = _profile(agent.get("demographics"))
            value = _satisfaction_value((agent.get("outcomes") or {}).get("satisfaction"))
            if value is not None:
                annotations.append(
                    LikertAnnotation(
                        question_key="self_satisfaction",
                        rater_id=str(agent_id),
                        subject_id=str(agent_id),
                        value=value,
                        scale_min=1,
                        scale_max=5,
                        perspective=Perspective.SELF_REPORT,
                    )
                )
        record = DialogueRecord(
            id=str(item.get("dialogue_id", f"casino-{index:05d}")),
            corpus_tag=CorpusTag.NEGOTIATION,
            turns=turns,
            speakers=speakers,
            annotations=annotations,
        )
        try:
            validate_record(record)
        except CorpusError as exc:
            warnings.warn(f"casino item {index}: {exc}, skipped")
            continue
        records.append(record)
    return records


def import_candor(items: list[dict]) -> list[DialogueRecord]:
    records = []
    for index, item in enumerate(items):
        turns = [
            (str(t.get("speaker", "unknown")), str(t.get("text", "")))
            for t in item.get("transcript", [])
            if t.get("text")
        ]
        if not turns:
            warnings.warn(f"candor item {index}: no usable turns, skipped")
            continue
        speaker_ids = sorted({s for s, _ in turns})
        annotations = []
        for rater, survey in (item.get("surveys") or {}).items():
            rater = str(rater)
            others = [s for s in speaker_ids if s != rater]
            liking = survey.get("i_like_my_partner")
            if isinstance(liking, int):
                annotations.append(
                    LikertAnnotation(
                        question_key="likes_partner",
                        rater_id=rater,
                        subject_id=rater,
                        value=liking,
                        scale_min=1,
                        scale_max=7,
                        perspective=Perspective.SELF_REPORT,
                    )
                )
            perceived = survey.get("partner_likes_me")
            if isinstance(perceived, int) and others:
                annotations.append(
                    LikertAnnotation(
                        question_key="likes_partner",
                        rater_id=rater,
                        subject_id=others[0],
                        value=perceived,
                        scale_min=1,
                        scale_max=7,
                        perspective=Perspective.PERCEPTION_OF_OTHER,
                    )
                )
        record = DialogueRecord(
            id=str(item.get("id", f"candor-{index:05d}")),
            corpus_tag=CorpusTag.SOCIAL,
            turns=turns,
            speakers={},
            annotations=annotations,
        )
        try:
            validate_record(record)
        except CorpusError as exc:
            warnings.warn(f"candor item {index}: {exc}, skipped")
            continue
        records.append(record)
    return records


def import_multiwoz(items: list[dict]) -> list[DialogueRecord]:
    records = []
    for index, item in enumerate(items):
        turns = [
            (str(t.get("speaker", "unknown")), str(t.get("text", "")))
            for t in item.get("turns", [])
            if t.get("text")
        ]
        if not turns:
            warnings.warn(f"multiwoz item {index}: no usable turns, skipped")
            continue
        user_ids = [s for s, _ in turns if s.lower() in ("user", "usr", "customer")]
        subject = user_ids[0] if user_ids else turns[0][0]
        annotations = [
            LikertAnnotation(
                question_key="user_satisfaction",
                rater_id=RESERVED_ANNOTATOR_ID,
                subject_id=subject,
                value=int(value),
                scale_min=1,
                scale_max=5,
                perspective=Perspective.THIRD_PARTY,
            )
            for value in item.get("satisfaction_ratings", [])
            if isinstance(value, int)
        ]
        record = DialogueRecord(
            id=str(item.get("dialogue_id", f"multiwoz-{index:05d}")),
            corpus_tag=CorpusTag.TASK_ORIENTED,
            turns=turns,
            speakers={},
            annotations=annotations,
        )
        try:
            validate_record(record)
        except CorpusError as exc:
            warnings.warn(f"multiwoz item {index}: {exc}, skipped")
            continue
        records.append(record)
    return records


_ADAPTERS = {
    "casino": import_casino,
    "candor": import_candor,
    "multiwoz": import_multiwoz,
}


def import_corpus(format_name: str, input_path: str | Path) -> list[DialogueRecord]:
    """Run one named adapter over a raw JSON file."""
    adapter = _ADAPTERS.get(format_name)
    if adapter is None:
        raise CorpusError(
            f"unknown import format {format_name!r}; choose from {sorted(_ADAPTERS)}"
        )
    try:
        items = json.loads(Path(input_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(f"cannot read {input_path}: {exc}") from None
    if not isinstance(items, list):
        raise CorpusError(f"{input_path}: expected a JSON array of dialogues")
    return adapter(items)
