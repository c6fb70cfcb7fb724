from __future__ import annotations

import dataclasses

import pytest

from termstatus.backend import BackendError, GenerationRequest, MockOracle
from termstatus.corpus import TermStatusPair, windowize
from termstatus.pipeline import (
    ExtractionConfig,
    extract_corpus,
    extract_one_stage,
    extract_two_stage,
    read_predictions,
    write_predictions,
)
from termstatus.prompting import INVALID_STATUS, build_status_input, build_term_input
from termstatus.synthetic import synthetic_dialogues

from conftest import CONSULT_FINAL_PAIRS


class ScriptedBackend:
    """Returns canned outputs by exact input text; counts calls."""

    def __init__(self, outputs: dict[str, str], default: str | None = None):
        self.outputs = outputs
        self.default = default
        self.calls: list[str] = []

    def generate(self, request: GenerationRequest) -> str:
        self.calls.append(request.input_text)
        if request.input_text in self.outputs:
            return self.outputs[request.input_text]
        if self.default is not None:
            return self.default
        raise BackendError("no scripted output")


class TestTwoStage:
    def test_oracle_recovers_consult_pairs(self, consult_window, schema, prompts):
        oracle = MockOracle.from_windows([consult_window], schema, prompts)
        result = extract_two_stage(consult_window, oracle, schema, ExtractionConfig(), prompts)
        assert {tuple(p) for p in result.pairs} == CONSULT_FINAL_PAIRS
        assert result.diagnostics.unknown_term_count == 0
        assert result.diagnostics.invalid_status_count == 0

    def test_empty_stage_one_skips_stage_two(self, consult_window, schema, prompts):
        backend = ScriptedBackend({build_term_input(consult_window, prompts): "[SOS][SEP]"})
        result = extract_two_stage(consult_window, backend, schema, ExtractionConfig(), prompts)
        assert result.pairs == frozenset()
        assert len(backend.calls) == 1

    def test_not_mentioned_dropped(self, consult_window, schema, prompts):
        nm_prompts = dataclasses.replace(prompts, include_not_mentioned=True)
        outputs = {build_term_input(consult_window, nm_prompts): "[SOS]cough,chest pain[SEP]"}
        outputs[build_status_input(consult_window, "cough", schema, nm_prompts)] = "not mentioned"
        outputs[build_status_input(consult_window, "chest pain", schema, nm_prompts)] = "appear"
        backend = ScriptedBackend(outputs)
        config = ExtractionConfig(include_not_mentioned=True, drop_not_mentioned=True)
        result = extract_two_stage(consult_window, backend, schema, config, prompts)
        assert result.pairs == {TermStatusPair("chest pain", "appear")}
        assert result.diagnostics.dropped_not_mentioned_count == 1

    def test_not_mentioned_kept_when_configured(self, consult_window, schema, prompts):
        nm_prompts = dataclasses.replace(prompts, include_not_mentioned=True)
        outputs = {build_term_input(consult_window, nm_prompts): "[SOS]cough[SEP]"}
        outputs[build_status_input(consult_window, "cough", schema, nm_prompts)] = "not mentioned"
        backend = ScriptedBackend(outputs)
        config = ExtractionConfig(include_not_mentioned=True, drop_not_mentioned=False)
        result = extract_two_stage(consult_window, backend, schema, config, prompts)
        assert result.pairs == {TermStatusPair("cough", "not mentioned")}
        assert result.diagnostics.dropped_not_mentioned_count == 0

    def test_invalid_status_kept_and_counted(self, consult_window, schema, prompts):
        outputs = {build_term_input(consult_window, prompts): "[SOS]cough[SEP]"}
        outputs[build_status_input(consult_window, "cough", schema, prompts)] = "sideways"
        backend = ScriptedBackend(outputs)
        result = extract_two_stage(consult_window, backend, schema, ExtractionConfig(), prompts)
        assert result.pairs == {TermStatusPair("cough", INVALID_STATUS)}
        assert result.diagnostics.invalid_status_count == 1

    def test_duplicate_terms_queried_once(self, consult_window, schema, prompts):
        outputs = {build_term_input(consult_window, prompts): "[SOS]cough,cough,cough[SEP]"}
        outputs[build_status_input(consult_window, "cough", schema, prompts)] = "appear"
        backend = ScriptedBackend(outputs)
        result = extract_two_stage(consult_window, backend, schema, ExtractionConfig(), prompts)
        assert result.pairs == {TermStatusPair("cough", "appear")}
        assert len(backend.calls) == 2  # one term call + one status call

    def test_unknown_terms_dropped_strict(self, consult_window, schema, prompts):
        outputs = {build_term_input(consult_window, prompts): "[SOS]unicorn,cough[SEP]"}
        outputs[build_status_input(consult_window, "cough", schema, prompts)] = "appear"
        backend = ScriptedBackend(outputs)
        result = extract_two_stage(consult_window, backend, schema, ExtractionConfig(), prompts)
        assert result.pairs == {TermStatusPair("cough", "appear")}
        assert result.diagnostics.unknown_term_count == 1

    def test_unknown_terms_kept_for_analysis(self, consult_window, schema, prompts):
        outputs = {build_term_input(consult_window, prompts): "[SOS]unicorn[SEP]"}
        backend = ScriptedBackend(outputs)
        config = ExtractionConfig(term_parse_policy="keep_unknown")
        result = extract_two_stage(consult_window, backend, schema, config, prompts)
        assert result.pairs == {TermStatusPair("unicorn", INVALID_STATUS)}

    def test_backend_error_tagged_with_stage(self, consult_window, schema, prompts):
        backend = ScriptedBackend({})
        with pytest.raises(BackendError, match="term stage"):
            extract_two_stage(consult_window, backend, schema, ExtractionConfig(), prompts)


class TestOneStage:
    def test_oracle_closure(self, consult_window, schema, prompts):
        oracle = MockOracle.from_windows([consult_window], schema, prompts, one_stage=True)
        config = ExtractionConfig(mode="one_stage")
        result = extract_one_stage(consult_window, oracle, schema, config, prompts)
        assert {tuple(p) for p in result.pairs} == CONSULT_FINAL_PAIRS

    def test_malformed_fragment_counted(self, consult_window, schema, prompts):
        backend = ScriptedBackend({}, default="[SOS]chest pain appear,cough: appear[SEP]")
        config = ExtractionConfig(mode="one_stage")
        result = extract_one_stage(consult_window, backend, schema, config, prompts)
        assert result.pairs == {TermStatusPair("cough", "appear")}
        assert result.diagnostics.malformed_pair_count == 1

    def test_empty_output(self, consult_window, schema, prompts):
        backend = ScriptedBackend({}, default="")
        config = ExtractionConfig(mode="one_stage")
        result = extract_one_stage(consult_window, backend, schema, config, prompts)
        assert result.pairs == frozenset()


class TestExtractCorpus:
    @pytest.fixture
    def windows(self, schema):
        dialogues = synthetic_dialogues(schema, 6, seed=8)
        return [w for d in dialogues for w in windowize(d)]

    def test_order_preserved(self, windows, schema, prompts):
        oracle = MockOracle.from_windows(windows, schema, prompts)
        extraction = extract_corpus(windows, oracle, schema, ExtractionConfig(), prompts)
        assert [r.key for r in extraction.results] == [w.key for w in windows]
        assert extraction.ok

    def test_failures_collected(self, consult_dialogue, schema, prompts):
        windows = windowize(consult_dialogue, window_size=5)
        poison = build_term_input(windows[2], prompts)
        inner = MockOracle.from_windows(windows, schema, prompts)

        class Flaky:
            def generate(self, request):
                if request.input_text == poison:
                    raise BackendError("backend went away")
                return inner.generate(request)

        extraction = extract_corpus(windows, Flaky(), schema, ExtractionConfig(), prompts)
        assert len(extraction.results) == len(windows) - 1
        assert [f.end_turn for f in extraction.failures] == [2]
        assert extraction.failures[0].stage == "term"
        assert not extraction.ok

    def test_parallel_matches_sequential(self, windows, schema, prompts):
        oracle = MockOracle.from_windows(windows, schema, prompts)
        sequential = extract_corpus(windows, oracle, schema, ExtractionConfig(), prompts)
        parallel = extract_corpus(
            windows, oracle, schema, ExtractionConfig(max_workers=4), prompts)
        assert sequential.results == parallel.results

    def test_rerun_writes_identical_predictions(self, tmp_path, windows, schema, prompts):
        oracle = MockOracle.from_windows(windows, schema, prompts)
        paths = []
        for name in ("a.jsonl", "b.jsonl"):
            extraction = extract_corpus(windows, oracle, schema, ExtractionConfig(), prompts)
            path = tmp_path / name
            write_predictions(extraction.results, path)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()


def test_truncation_drops_oldest_turns(consult_window, schema, prompts):
    class LimitedBackend(ScriptedBackend):
        max_input_chars = 220

    backend = LimitedBackend({}, default="[SOS][SEP]")
    extract_two_stage(consult_window, backend, schema, ExtractionConfig(), prompts)
    (term_call,) = backend.calls
    assert len(term_call) <= 220
    assert term_call.endswith(prompts.term_prompt)
    # the surviving text is the tail of the full rendering
    full = build_term_input(consult_window, prompts)
    assert full.endswith(term_call.removeprefix("Patient: ").removeprefix("Doctor: "))


def test_predictions_round_trip(tmp_path, schema, prompts):
    dialogues = synthetic_dialogues(schema, 5, seed=14)
    windows = [w for d in dialogues for w in windowize(d)]
    oracle = MockOracle.from_windows(windows, schema, prompts)
    extraction = extract_corpus(windows, oracle, schema, ExtractionConfig(), prompts)
    path = tmp_path / "predictions.jsonl"
    write_predictions(extraction.results, path)
    assert read_predictions(path) == extraction.results
