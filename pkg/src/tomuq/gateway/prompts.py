"""Prompt construction for certainty elicitation.

Every prompt pairs a fixed system message with a user message of the form
preamble + (optional demographics sentence) + transcript + question +
step-by-step suffix.  Question phrasings are registered per corpus tag and
question key; the task decides whose certainty (or which world outcome)
the question asks about.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

from tomuq.corpus import (
    CorpusTag,
    DialogueRecord,
    Perspective,
    render_demographics,
    render_transcript,
    speaker_labels,
)
from tomuq.errors import PromptError

SYSTEM_PROMPT = (
    "You are TheoryOfMindGPT, an expert language model at using your "
    "theory-of-mind capabilities to predict the beliefs and actions of "
    "others in human conversations. You will be given a potentially "
    "unfinished conversation between two speakers. Put yourself in the "
    "mindset of the speakers and try to reason about the requested "
    "conversation outcome. Use the keyword \"CERTAINTY\" to report your "
    "prediction for the outcome of interest. Report your answer on a "
    "scale from 1 to 10 with 1 indicating \"not likely at all\" and 10 "
    "indicating \"almost certainly\". For example, \"CERTAINTY = 7\"."
)

STEP_BY_STEP_SUFFIX = (
    "Let's think step by step, but keep your answer concise "
    "(less than 100 words)."
)


class PromptTask(str, Enum):
    ONE_TUQ = "one_tuq"
    TWO_TUQ = "two_tuq"
    FUNQ_WORLD_SIDE = "funq_world_side"


@dataclass(frozen=True)
class PromptBundle:
    """A fully rendered prompt plus the metadata backends key on."""

    system_text: str
    user_text: str
    task: PromptTask
    dialogue_id: str
    include_demographics: bool
    fingerprint: str = field(init=False)

    def __post_init__(self) -> None:
        digest = hashlib.sha256()
        for part in (
            self.system_text,
            self.user_text,
            self.task.value,
            self.dialogue_id,
            str(self.include_demographics),
        ):
            digest.update(part.encode("utf-8"))
            digest.update(b"\x00")
        object.__setattr__(self, "fingerprint", digest.hexdigest())


_PREAMBLES = {
    CorpusTag.TASK_ORIENTED: (
        "In the following conversation segment, a human user is interacting "
        "with an AI task assistant."
    ),
    CorpusTag.NEGOTIATION: (
        "In the following conversation, two campers ({a} and {b}) negotiate "
        "how to divide extra camping supplies."
    ),
    CorpusTag.SOCIAL: (
        "In the following conversation segment, two strangers ({a} and {b}) "
        "are getting to know each other over a video call."
    ),
    CorpusTag.SYNTHETIC: (
        "In the following conversation segment, two speakers ({a} and {b}) "
        "are talking."
    ),
}

# question templates per (corpus tag, question key, prompt task); {r} is the
# rater/belief holder, {s} the subject of the belief.
_SATISFACTION_QUESTIONS = {
    PromptTask.ONE_TUQ: (
        "Now, fast-forward to the end of the conversation. How certain is "
        "{r} that they ({r}) are more satisfied than would occur by chance?"
    ),
    PromptTask.FUNQ_WORLD_SIDE: (
        "Now, fast-forward to the end of the conversation. How likely is it "
        "that {r} is more satisfied than would occur by chance?"
    ),
}
_LIKING_QUESTIONS = {
    PromptTask.ONE_TUQ: (
        "Now, fast-forward to the end of the conversation. How certain is "
        "{s} that they ({s}) like {o} more than would occur by chance?"
    ),
    PromptTask.TWO_TUQ: (
        "Now, fast-forward to the end of the conversation. How certain is "
        "{r} that {s} likes {r} more than would occur by chance?"
    ),
    PromptTask.FUNQ_WORLD_SIDE: (
        "Now, fast-forward to the end of the conversation. How likely is it "
        "that {s} likes {r} more than would occur by chance?"
    ),
}

_QUESTIONS: dict[tuple[CorpusTag, str], dict[PromptTask, str]] = {
    (CorpusTag.NEGOTIATION, "self_satisfaction"): _SATISFACTION_QUESTIONS,
    (CorpusTag.TASK_ORIENTED, "user_satisfaction"): _SATISFACTION_QUESTIONS,
    (CorpusTag.SOCIAL, "likes_partner"): _LIKING_QUESTIONS,
    (CorpusTag.SYNTHETIC, "likes_partner"): _LIKING_QUESTIONS,
}


def _question_roles(
    record: DialogueRecord, question_key: str, task: PromptTask
) -> tuple[str, str]:
    """Resolve (rater_id, subject_id) for the question from the annotations."""
    perceptions = [
        a
        for a in record.annotations
        if a.question_key == question_key
        and a.perspective is Perspective.PERCEPTION_OF_OTHER
    ]
    if task in (PromptTask.TWO_TUQ, PromptTask.FUNQ_WORLD_SIDE) and perceptions:
        ann = sorted(perceptions, key=lambda a: (a.subject_id, a.rater_id))[0]
        return ann.rater_id, ann.subject_id
    reports = [
        a
        for a in record.annotations
        if a.question_key == question_key
        and a.perspective in (Perspective.SELF_REPORT, Perspective.THIRD_PARTY)
    ]
    if reports:
        ann = sorted(reports, key=lambda a: (a.subject_id, a.rater_id))[0]
        return ann.subject_id, ann.subject_id
    raise PromptError(
        f"dialogue {record.id!r}: no annotation resolves the speakers for "
        f"question {question_key!r} / task {task.value}"
    )


def build_prompt(
    task: PromptTask | str,
    record: DialogueRecord,
    question_key: str,
    include_demographics: bool = False,
    char_budget: int = 20_000,
) -> PromptBundle:
    """Render the user prompt for one dialogue and task."""
    task = PromptTask(task)
    questions = _QUESTIONS.get((record.corpus_tag, question_key))
    if questions is None or task not in questions:
        raise PromptError(
            f"no question template for corpus tag {record.corpus_tag.value!r}, "
            f"question {question_key!r}, task {task.value!r}"
        )
    labels = speaker_labels(record)
    rater_id, subject_id = _question_roles(record, question_key, task)

    def label_of(sid: str) -> str:
        if record.corpus_tag is CorpusTag.TASK_ORIENTED:
            return "the user"
        return labels.get(sid, sid)

    ordered = sorted(labels)
    slots = {
        "r": label_of(rater_id),
        "s": label_of(subject_id),
        "a": labels[ordered[0]] if ordered else "Speaker A",
        "b": labels[ordered[1]] if len(ordered) > 1 else "Speaker B",
    }
    # the "other" speaker for self-liking questions: the dialogue partner
    others = [sid for sid in ordered if sid != subject_id]
    slots["o"] = labels[others[0]] if others else slots["b"]

    parts = [_PREAMBLES[record.corpus_tag].format(**slots)]
    if include_demographics:
        profile = record.speakers.get(rater_id)
        if profile is not None:
            sentence = render_demographics(profile, label_of(rater_id))
            if sentence:
                parts.append(sentence)
    parts.append(render_transcript(record, char_budget))
    parts.append(questions[task].format(**slots) + " " + STEP_BY_STEP_SUFFIX)
    return PromptBundle(
        system_text=SYSTEM_PROMPT,
        user_text="\n\n".join(parts),
        task=task,
        dialogue_id=record.id,
        include_demographics=include_demographics,
    )
