import pytest

from avjigsaw.builder import prepare_clips
from avjigsaw.config import BuildConfig, InferenceConfig
from avjigsaw.inference import MockInferenceClient, TransportError
from avjigsaw.selectors import (SelectorParseError, decide_dominance,
                                parse_dominance_answer, parse_modality_vector,
                                select_modalities)
from avjigsaw.types import Modality
from conftest import synth_sample


class TestParseDominance:
    def test_judge_answer_a(self):
        raw = "<thinking>audio carries the narrative</thinking><answer>A</answer>"
        assert parse_dominance_answer(raw) is Modality.A

    def test_lowercase_with_whitespace(self):
        assert parse_dominance_answer("<answer> v </answer>") is Modality.V

    def test_va_is_not_a_dominance_token(self):
        with pytest.raises(SelectorParseError) as err:
            parse_dominance_answer("<answer>VA</answer>")
        assert err.value.code == "UNPARSEABLE_DOMINANCE"

    def test_missing_answer_block(self):
        with pytest.raises(SelectorParseError):
            parse_dominance_answer("V")


class TestParseModalityVector:
    def test_documented_example(self):
        raw = '<answer>{"modalities": ["V","A","VA","V","A","V"]}</answer>'
        assert parse_modality_vector(raw, 6) == [
            Modality.V, Modality.A, Modality.VA, Modality.V, Modality.A, Modality.V]

    def test_wrong_length(self):
        raw = '<answer>{"modalities": ["V","A","VA","V","A"]}</answer>'
        with pytest.raises(SelectorParseError) as err:
            parse_modality_vector(raw, 6)
        assert err.value.code == "BAD_LENGTH"

    def test_bad_token(self):
        raw = '<answer>{"modalities": ["V","A","AUDIO"]}</answer>'
        with pytest.raises(SelectorParseError) as err:
            parse_modality_vector(raw, 3)
        assert err.value.code == "BAD_TOKEN"

    def test_invalid_json(self):
        with pytest.raises(SelectorParseError) as err:
            parse_modality_vector("<answer>[V, A]</answer>", 2)
        assert err.value.code == "INVALID_JSON"

    def test_degenerate_all_same_accepted_with_warning(self, caplog):
        raw = '<answer>{"modalities": ["VA","VA","VA"]}</answer>'
        with caplog.at_level("WARNING"):
            vector = parse_modality_vector(raw, 3)
        assert vector == [Modality.VA] * 3
        assert any("degenerate" in rec.message for rec in caplog.records)

    def test_case_normalized(self):
        raw = '<answer>{"modalities": ["v", "a"]}</answer>'
        assert parse_modality_vector(raw, 2) == [Modality.V, Modality.A]


class FlakyClient:
    """Returns garbage n times, then delegates to the mock client."""

    def __init__(self, bad_calls, then="pass", error=False):
        self.bad_calls = bad_calls
        self.error = error
        self.inner = MockInferenceClient(then)
        self.calls = 0

    def complete(self, messages):
        self.calls += 1
        if self.calls <= self.bad_calls:
            if self.error:
                raise TransportError("down")
            return "<answer>gibberish</answer>"
        return self.inner.complete(messages)


class TestEndpointRoundTrips:
    def setup_method(self):
        self.sample = synth_sample("sel", 18.0, seed=20)
        self.bcfg = BuildConfig()
        self.icfg = InferenceConfig(endpoint_url="mock://pass")

    def test_decide_dominance_happy_path(self):
        dom, raw = decide_dominance(self.sample, self.bcfg, self.icfg,
                                    MockInferenceClient("pass"))
        assert dom is Modality.V
        assert "<answer>" in raw

    def test_dominance_retry_once_then_success(self):
        client = FlakyClient(bad_calls=1)
        dom, _ = decide_dominance(self.sample, self.bcfg, self.icfg, client)
        assert dom is Modality.V
        assert client.calls == 2

    def test_dominance_fallback_after_two_bad_answers(self):
        client = FlakyClient(bad_calls=2)
        dom, raw = decide_dominance(self.sample, self.bcfg, self.icfg, client)
        assert dom is Modality.V and raw == ""
        assert client.calls == 2

    def test_dominance_fallback_on_transport_error(self):
        client = FlakyClient(bad_calls=99, error=True)
        dom, _ = decide_dominance(self.sample, self.bcfg, self.icfg, client)
        assert dom is Modality.V

    def test_select_modalities_happy_path(self):
        clips = prepare_clips(self.sample, self.bcfg)
        vector, _ = select_modalities(self.sample, clips, self.bcfg, self.icfg,
                                      MockInferenceClient("pass"))
        assert len(vector) == 6
        assert set(vector) == {Modality.V, Modality.A, Modality.VA}

    def test_select_modalities_fallback_all_va(self):
        clips = prepare_clips(self.sample, self.bcfg)
        client = FlakyClient(bad_calls=2)
        vector, _ = select_modalities(self.sample, clips, self.bcfg, self.icfg, client)
        assert vector == [Modality.VA] * 6
