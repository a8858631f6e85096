import numpy as np
import pytest

from tomuq.corpus import CorpusTag, DemographicProfile
from tomuq.errors import BackendError, CertaintyParseError
from tomuq.gateway import (
    ResponseCache,
    SamplingOptions,
    SyntheticCompletionBackend,
    SyntheticEmbeddingBackend,
    TransportError,
    TruthRow,
    build_prompt,
    complete,
    embed,
    parse_certainty,
)
from tomuq.gateway.cache import embedding_key
from tomuq.gateway.prompts import SYSTEM_PROMPT, PromptBundle, PromptTask
from tomuq.errors import PromptError

from conftest import make_annotation, make_record


class TestParseCertainty:
    def test_keyword_with_equals(self):
        assert parse_certainty("Reasoning about tone... CERTAINTY = 7") == 0.7

    def test_colon_and_trailing_period(self):
        assert parse_certainty("CERTAINTY: 10.") == 1.0

    def test_keyword_absent(self):
        with pytest.raises(CertaintyParseError, match="keyword absent"):
            parse_certainty("I am 7/10 sure")

    def test_round_trip_full_scale(self):
        for k in range(1, 11):
            assert parse_certainty(f"CERTAINTY = {k}") == k / 10

    def test_last_report_wins(self):
        assert parse_certainty("CERTAINTY = 3 ... but wait. CERTAINTY = 8") == 0.8

    def test_case_insensitive_and_bare_space(self):
        assert parse_certainty("certainty 4") == 0.4

    def test_out_of_range(self):
        with pytest.raises(CertaintyParseError, match="outside"):
            parse_certainty("CERTAINTY = 11")
        with pytest.raises(CertaintyParseError, match="outside"):
            parse_certainty("CERTAINTY = 0")

    def test_non_integer(self):
        with pytest.raises(CertaintyParseError, match="non-integer"):
            parse_certainty("CERTAINTY = 7.5")

    def test_keyword_without_value(self):
        with pytest.raises(CertaintyParseError, match="no value"):
            parse_certainty("CERTAINTY is what matters most here.")


def _social_record(record_id="d1"):
    return make_record(
        record_id=record_id,
        annotations=[
            make_annotation(value=3),
            make_annotation(
                rater_id="s1",
                subject_id="s2",
                value=4,
                perspective="perception_of_other",
            ),
        ],
        speakers={"s2": DemographicProfile(age=34, sex="female", education="college")},
    )


def _task_oriented_record():
    return make_record(
        record_id="woz1",
        tag=CorpusTag.TASK_ORIENTED,
        turns=[("user", "I need a hotel."), ("system", "Any area preference?")],
        annotations=[
            make_annotation(
                question_key="user_satisfaction",
                rater_id="annotator",
                subject_id="user",
                value=4,
                perspective="third_party",
            )
        ],
    )


class TestBuildPrompt:
    def test_task_oriented_question_phrasing(self):
        prompt = build_prompt(PromptTask.ONE_TUQ, _task_oriented_record(), "user_satisfaction")
        assert (
            "How certain is the user that they (the user) are more satisfied "
            "than would occur by chance?" in prompt.user_text
        )
        assert prompt.user_text.rstrip().endswith("(less than 100 words).")

    def test_system_prompt_prefix(self):
        prompt = build_prompt(PromptTask.ONE_TUQ, _social_record(), "likes_partner")
        assert prompt.system_text.startswith("You are TheoryOfMindGPT")
        assert prompt.system_text == SYSTEM_PROMPT

    def test_demographics_flag(self):
        off = build_prompt(
            PromptTask.ONE_TUQ, _social_record(), "likes_partner", include_demographics=False
        )
        on = build_prompt(
            PromptTask.ONE_TUQ, _social_record(), "likes_partner", include_demographics=True
        )
        assert "34-year-old" not in off.user_text
        assert "Speaker B is a 34-year-old female with a college education." in on.user_text

    def test_fingerprint_deterministic(self):
        a = build_prompt(PromptTask.ONE_TUQ, _social_record(), "likes_partner")
        b = build_prompt(PromptTask.ONE_TUQ, _social_record(), "likes_partner")
        assert a.fingerprint == b.fingerprint

    def test_fingerprint_distinguishes_tasks(self):
        a = build_prompt(PromptTask.ONE_TUQ, _social_record(), "likes_partner")
        b = build_prompt(PromptTask.TWO_TUQ, _social_record(), "likes_partner")
        assert a.fingerprint != b.fingerprint

    def test_world_side_question(self):
        prompt = build_prompt(PromptTask.FUNQ_WORLD_SIDE, _social_record(), "likes_partner")
        assert "How likely is it that Speaker B likes Speaker A" in prompt.user_text

    def test_two_tuq_question_names_both(self):
        prompt = build_prompt(PromptTask.TWO_TUQ, _social_record(), "likes_partner")
        assert "How certain is Speaker A that Speaker B likes Speaker A" in prompt.user_text

    def test_unknown_question_key(self):
        with pytest.raises(PromptError, match="no question template"):
            build_prompt(PromptTask.ONE_TUQ, _social_record(), "mystery_key")


class TestSamplingOptions:
    def test_defaults(self):
        options = SamplingOptions()
        assert options.temperature == 1.0
        assert options.max_new_tokens == 256
        assert options.retry_limit == 3
        assert options.n_samples == 1

    def test_rejects_bad_values(self):
        with pytest.raises(BackendError):
            SamplingOptions(n_samples=0)
        with pytest.raises(BackendError):
            SamplingOptions(temperature=-1)


def _prompt(dialogue_id="d1", task=PromptTask.TWO_TUQ):
    return PromptBundle(
        system_text="sys",
        user_text="user",
        task=task,
        dialogue_id=dialogue_id,
        include_demographics=False,
    )


class _CountingBackend:
    """Wraps a backend, counting generate calls."""

    def __init__(self, inner):
        self.inner = inner
        self.backend_id = inner.backend_id
        self.calls = 0

    def generate(self, prompt, sample_index, attempt, options):
        self.calls += 1
        return self.inner.generate(prompt, sample_index, attempt, options)


class _ScriptedBackend:
    """Returns scripted text per (sample_index, attempt)."""

    def __init__(self, script):
        self.script = script
        self.backend_id = "scripted"

    def generate(self, prompt, sample_index, attempt, options):
        entry = self.script.get((sample_index, attempt), "no keyword here")
        if entry is TransportError:
            raise TransportError("boom")
        return entry


class TestComplete:
    def test_synthetic_determinism(self):
        truths = {"d1": TruthRow(0.5, 0.7, 0.2)}
        backend = SyntheticCompletionBackend(truths, sigma=0.1, seed=5)
        options = SamplingOptions(n_samples=3)
        first = complete(_prompt(), options, backend)
        second = complete(_prompt(), options, backend)
        assert [s.raw_text for s in first] == [s.raw_text for s in second]
        assert len(first) == 3

    def test_noiseless_backend_reports_target(self):
        truths = {"d1": TruthRow(0.5, 0.7, 0.2)}
        backend = SyntheticCompletionBackend(truths, sigma=0.0, seed=5)
        samples = complete(_prompt(), SamplingOptions(n_samples=4), backend)
        assert all(s.valid and s.parsed == 0.7 for s in samples)

    def test_unknown_dialogue(self):
        backend = SyntheticCompletionBackend({}, sigma=0.0, seed=5)
        with pytest.raises(BackendError, match="unknown dialogue"):
            complete(_prompt(), SamplingOptions(), backend)

    def test_warm_cache_uses_zero_backend_calls(self, tmp_path):
        truths = {"d1": TruthRow(0.5, 0.7, 0.2)}
        cache = ResponseCache(tmp_path / "cache")
        backend = _CountingBackend(SyntheticCompletionBackend(truths, sigma=0.1, seed=5))
        options = SamplingOptions(n_samples=3)
        cold = complete(_prompt(), options, backend, cache)
        assert backend.calls == 3
        warm = complete(_prompt(), options, backend, cache)
        assert backend.calls == 3
        assert [s.raw_text for s in cold] == [s.raw_text for s in warm]
        assert cache.stats()["hits"] == 3

    def test_parse_failure_marks_invalid(self):
        backend = _ScriptedBackend({})
        options = SamplingOptions(retry_limit=0)
        (sample,) = complete(_prompt(), options, backend)
        assert not sample.valid
        assert sample.parsed is None

    def test_retry_recovers_valid_sample(self):
        backend = _ScriptedBackend({(0, 2): "CERTAINTY = 6"})
        options = SamplingOptions(retry_limit=3)
        (sample,) = complete(_prompt(), options, backend)
        assert sample.valid and sample.parsed == 0.6

    def test_transport_failure_carries_sample_index(self):
        backend = _ScriptedBackend(
            {(0, a): TransportError for a in range(5)}
        )
        with pytest.raises(BackendError, match="sample 0"):
            complete(_prompt(), SamplingOptions(retry_limit=2), backend)

    def test_parsed_values_stay_on_grid(self):
        truths = {"d1": TruthRow(0.5, 0.43, -0.07)}
        backend = SyntheticCompletionBackend(truths, sigma=0.3, seed=6)
        samples = complete(_prompt(), SamplingOptions(n_samples=20), backend)
        for s in samples:
            assert s.valid
            assert round(s.parsed * 10) in range(1, 11)
            assert s.parsed == round(s.parsed * 10) / 10

    def test_sample_mean_tracks_target(self):
        # seeded Monte Carlo: 10-sample means stay within 0.15 of the target
        truths = {"d1": TruthRow(0.55, 0.55, 0.0)}
        hits = 0
        for seed in range(200):
            backend = SyntheticCompletionBackend(truths, sigma=0.1, seed=seed)
            samples = complete(_prompt(), SamplingOptions(n_samples=10), backend)
            mean = np.mean([s.parsed for s in samples if s.valid])
            hits += abs(mean - 0.55) <= 0.15
        assert hits / 200 >= 0.95


class TestEmbed:
    def test_deterministic_and_default_dim(self):
        truths = {"d1": TruthRow(0.5, 0.7, 0.2)}
        backend = SyntheticEmbeddingBackend(truths, seed=3)
        a = embed(_prompt(), backend)
        b = embed(_prompt(), backend)
        assert a.dim == 768
        assert np.array_equal(a.values, b.values)

    def test_prompts_differing_by_one_char_differ(self):
        truths = {"d1": TruthRow(0.5, 0.7, 0.2)}
        backend = SyntheticEmbeddingBackend(truths, seed=3, dim=32)
        a = embed(_prompt(), backend)
        other = PromptBundle(
            system_text="sys",
            user_text="user!",
            task=PromptTask.TWO_TUQ,
            dialogue_id="d1",
            include_demographics=False,
        )
        b = embed(other, backend)
        assert not np.array_equal(a.values, b.values)

    def test_signal_coordinate_tracks_target(self):
        truths = {"d1": TruthRow(0.5, 0.7, 0.2)}
        backend = SyntheticEmbeddingBackend(truths, seed=3, dim=16, signal_sigma=0.0)
        vec = embed(_prompt(), backend)
        assert vec.values[0] == pytest.approx(0.7)

    def test_cache_round_trip_and_header(self, tmp_path):
        truths = {"d1": TruthRow(0.5, 0.7, 0.2)}
        cache = ResponseCache(tmp_path / "cache")
        backend = SyntheticEmbeddingBackend(truths, seed=3, dim=16)
        cold = embed(_prompt(), backend, cache=cache)
        warm = embed(_prompt(), backend, cache=cache)
        assert np.array_equal(cold.values, warm.values)
        key = embedding_key(backend.backend_id, _prompt().fingerprint)
        raw = cache._path(key).read_bytes()
        assert raw[:8] == b"TOMUQVEC"
        assert int.from_bytes(raw[12:16], "little") == 16
        assert len(raw) == 16 + 16 * 8

    def test_unknown_dialogue(self):
        backend = SyntheticEmbeddingBackend({}, seed=3, dim=16)
        with pytest.raises(BackendError, match="unknown dialogue"):
            embed(_prompt(), backend)

    def test_joint_only_mode_hides_side_signal(self):
        truths = {"d1": TruthRow(0.5, 0.7, 0.2, nuisance=0.4)}
        backend = SyntheticEmbeddingBackend(
            truths, seed=3, dim=8, mode="joint_only", signal_sigma=0.0
        )
        forecast_side = embed(_prompt(task=PromptTask.TWO_TUQ), backend)
        world_side = embed(_prompt(task=PromptTask.FUNQ_WORLD_SIDE), backend)
        assert forecast_side.values[0] == pytest.approx(0.4)
        assert world_side.values[0] == pytest.approx(0.4 - 0.2)
        assert forecast_side.values[0] - world_side.values[0] == pytest.approx(0.2)


class _FakeResponse:
    def __init__(self, status_code, payload):
        self.status_code = status_code
        self._payload = payload
        self.text = str(payload)

    def json(self):
        return self._payload


class _FakeSession:
    """Records requests and plays back scripted responses."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.requests = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.requests.append({"url": url, "json": json, "headers": headers})
        entry = self.responses.pop(0)
        if isinstance(entry, Exception):
            raise entry
        return entry


class TestOpenAICompatibleBackend:
    def _backend(self, responses, **kwargs):
        from tomuq.gateway.backends import OpenAICompatibleBackend

        return OpenAICompatibleBackend(
            model="test-model",
            base_url="https://api.example.test/v1",
            api_key="secret",
            session=_FakeSession(responses),
            **kwargs,
        )

    def test_request_shape_and_parse(self):
        payload = {"choices": [{"message": {"content": "CERTAINTY = 6"}}]}
        backend = self._backend([_FakeResponse(200, payload)])
        text = backend.generate(_prompt(), 0, 0, SamplingOptions(temperature=0.7))
        assert text == "CERTAINTY = 6"
        request = backend._session.requests[0]
        assert request["url"].endswith("/chat/completions")
        assert request["headers"]["Authorization"] == "Bearer secret"
        body = request["json"]
        assert body["model"] == "test-model"
        assert body["temperature"] == 0.7
        assert body["max_tokens"] == 256
        assert [m["role"] for m in body["messages"]] == ["system", "user"]

    def test_server_errors_are_retryable_transport_errors(self):
        backend = self._backend([_FakeResponse(500, {}), _FakeResponse(429, {})])
        for _ in range(2):
            with pytest.raises(TransportError):
                backend.generate(_prompt(), 0, 0, SamplingOptions())

    def test_client_error_is_fatal(self):
        backend = self._backend([_FakeResponse(401, {"error": "denied"})])
        with pytest.raises(BackendError, match="401"):
            backend.generate(_prompt(), 0, 0, SamplingOptions())

    def test_complete_retries_transport_then_succeeds(self):
        import requests as requests_lib

        good = _FakeResponse(200, {"choices": [{"message": {"content": "CERTAINTY = 3"}}]})
        backend = self._backend([requests_lib.ConnectionError("down"), good])
        (sample,) = complete(_prompt(), SamplingOptions(retry_limit=2), backend)
        assert sample.valid and sample.parsed == 0.3

    def test_missing_base_url(self, monkeypatch):
        from tomuq.gateway.backends import OpenAICompatibleBackend

        monkeypatch.delenv("TOMUQ_API_BASE", raising=False)
        with pytest.raises(BackendError, match="TOMUQ_API_BASE"):
            OpenAICompatibleBackend(model="m", session=_FakeSession([]))

    def test_embedding_request_and_parse(self):
        from tomuq.gateway.backends import OpenAICompatibleEmbeddingBackend

        payload = {"data": [{"embedding": [0.1, 0.2, 0.3]}]}
        backend = OpenAICompatibleEmbeddingBackend(
            model="embed-model",
            base_url="https://api.example.test/v1",
            api_key="secret",
            session=_FakeSession([_FakeResponse(200, payload)]),
        )
        vector = embed(_prompt(), backend)
        assert vector.dim == 3
        request = backend._session.requests[0]
        assert request["url"].endswith("/embeddings")
        assert request["json"]["input"][0].startswith("sys")
