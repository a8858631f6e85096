import pytest

from tomuq.corpus import (
    CorpusTag,
    DemographicProfile,
    DialogueRecord,
    LikertAnnotation,
    Perspective,
)


def make_record(
    record_id="d1",
    tag=CorpusTag.SOCIAL,
    turns=None,
    speakers=None,
    annotations=None,
):
    return DialogueRecord(
        id=record_id,
        corpus_tag=tag,
        turns=turns or [("s1", "Hello there."), ("s2", "Hi, good to meet you.")],
        speakers=speakers or {},
        annotations=annotations or [],
    )


def make_annotation(
    question_key="likes_partner",
    rater_id="s2",
    subject_id="s2",
    value=3,
    scale_min=1,
    scale_max=5,
    perspective=Perspective.SELF_REPORT,
):
    return LikertAnnotation(
        question_key=question_key,
        rater_id=rater_id,
        subject_id=subject_id,
        value=value,
        scale_min=scale_min,
        scale_max=scale_max,
        perspective=perspective,
    )


@pytest.fixture
def liking_corpus():
    """Five dialogues with self-reports 1..5 and perceptions 5,4,3,2,1."""
    records = []
    for i, (own, perceived) in enumerate(zip([1, 2, 3, 4, 5], [5, 4, 3, 2, 1])):
        records.append(
            make_record(
                record_id=f"d{i}",
                annotations=[
                    make_annotation(value=own),
                    make_annotation(
                        rater_id="s1",
                        subject_id="s2",
                        value=perceived,
                        perspective=Perspective.PERCEPTION_OF_OTHER,
                    ),
                ],
            )
        )
    return records


@pytest.fixture
def demographic_profile():
    return DemographicProfile(age=34, sex="female", education="college")
