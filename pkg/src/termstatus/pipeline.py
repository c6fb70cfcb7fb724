"""Inference orchestration: two-stage extraction and the one-stage baseline.

Two-stage mode asks the backend for the window's terms, then for each
distinct parsed term builds a schema-grounded status prompt and asks again.
One-stage mode issues a single call and parses "term: status" pairs out of
the output. Either way the result is a validated pair set per window plus
diagnostics counters for everything the model got structurally wrong.
"""

from __future__ import annotations

import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Callable, Iterable, Sequence

from .backend import BackendError, GenerationRequest, GenerativeBackend
from .corpus import TermStatusPair, Turn, Window
from .prompting import (
    INVALID_STATUS,
    MALFORMED_PAIR,
    UNKNOWN_TERM,
    PromptConfig,
    build_status_input,
    build_term_input,
    inference_prompts,
    parse_pairs_one_stage,
    parse_status,
    parse_terms,
    render_dialogue,
)
from .schema import Schema

TWO_STAGE = "two_stage"
ONE_STAGE = "one_stage"


@dataclass(frozen=True)
class ExtractionConfig:
    mode: str = TWO_STAGE
    term_parse_policy: str = "strict"
    include_not_mentioned: bool = False
    max_new_tokens_terms: int = 128
    max_new_tokens_status: int = 16
    drop_not_mentioned: bool = True
    max_workers: int = 1

    def __post_init__(self) -> None:
        if self.mode not in (TWO_STAGE, ONE_STAGE):
            raise ValueError(f"unknown extraction mode {self.mode!r}")
        if self.term_parse_policy not in ("strict", "keep_unknown"):
            raise ValueError(f"unknown term parse policy {self.term_parse_policy!r}")


@dataclass(frozen=True)
class Diagnostics:
    unknown_term_count: int = 0
    invalid_status_count: int = 0
    dropped_not_mentioned_count: int = 0
    malformed_pair_count: int = 0

    def to_dict(self) -> dict[str, int]:
        return {
            "unknown_term_count": self.unknown_term_count,
            "invalid_status_count": self.invalid_status_count,
            "dropped_not_mentioned_count": self.dropped_not_mentioned_count,
            "malformed_pair_count": self.malformed_pair_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Diagnostics":
        return cls(
            unknown_term_count=int(data.get("unknown_term_count", 0)),
            invalid_status_count=int(data.get("invalid_status_count", 0)),
            dropped_not_mentioned_count=int(data.get("dropped_not_mentioned_count", 0)),
            malformed_pair_count=int(data.get("malformed_pair_count", 0)),
        )

    def __add__(self, other: "Diagnostics") -> "Diagnostics":
        return Diagnostics(
            self.unknown_term_count + other.unknown_term_count,
            self.invalid_status_count + other.invalid_status_count,
            self.dropped_not_mentioned_count + other.dropped_not_mentioned_count,
            self.malformed_pair_count + other.malformed_pair_count,
        )


@dataclass(frozen=True)
class ExtractionResult:
    dialogue_id: str
    end_turn: int
    pairs: frozenset[TermStatusPair]
    diagnostics: Diagnostics = Diagnostics()

    @property
    def key(self) -> tuple[str, int]:
        return (self.dialogue_id, self.end_turn)


@dataclass(frozen=True)
class ExtractionFailure:
    dialogue_id: str
    end_turn: int
    stage: str
    message: str


@dataclass
class CorpusExtraction:
    results: list[ExtractionResult] = field(default_factory=list)
    failures: list[ExtractionFailure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def total_diagnostics(self) -> Diagnostics:
        total = Diagnostics()
        for r in self.results:
            total = total + r.diagnostics
        return total


def _fit_window(window: Window, backend: GenerativeBackend, build: Callable[[Window], str]) -> str:
    """Build an input, dropping oldest turns if the backend advertises a limit.

    The prompt suffix is never truncated; in the worst case a single (final)
    turn remains and the input is passed through as-is.
    """
    limit = getattr(backend, "max_input_chars", None)
    text = build(window)
    if limit is None:
        return text
    turns: tuple[Turn, ...] = window.turns
    while len(text) > limit and len(turns) > 1:
        turns = turns[1:]
        text = build(Window(
            dialogue_id=window.dialogue_id,
            end_turn=window.end_turn,
            turns=turns,
            gold=window.gold,
            events=window.events,
        ))
    return text


def _generate(backend: GenerativeBackend, text: str, max_new_tokens: int, stage: str) -> str:
    try:
        return backend.generate(GenerationRequest(input_text=text, max_new_tokens=max_new_tokens))
    except BackendError as exc:
        raise BackendError(f"{stage} stage: {exc}") from exc


def extract_two_stage(
    window: Window,
    backend: GenerativeBackend,
    schema: Schema,
    config: ExtractionConfig,
    prompts: PromptConfig,
) -> ExtractionResult:
    """Terms first, then one status call per distinct parsed term."""
    prompts = inference_prompts(prompts, config.include_not_mentioned)
    tally: Counter = Counter()

    term_text = _fit_window(window, backend, lambda w: build_term_input(w, prompts))
    raw_terms = _generate(backend, term_text, config.max_new_tokens_terms, "term")
    terms = parse_terms(raw_terms, schema, config.term_parse_policy, prompts, tally)

    pairs: list[TermStatusPair] = []
    invalid = 0
    dropped = 0
    for term in terms:
        if term not in schema:
            # keep_unknown policy: no status prompt can be built, keep the term visible.
            pairs.append(TermStatusPair(term, INVALID_STATUS))
            continue
        status_text = _fit_window(window, backend, lambda w: build_status_input(w, term, schema, prompts))
        raw_status = _generate(backend, status_text, config.max_new_tokens_status, "status")
        candidates = schema.status_candidates(term, config.include_not_mentioned)
        status = parse_status(raw_status, candidates, prompts)
        if status == INVALID_STATUS:
            invalid += 1
            pairs.append(TermStatusPair(term, INVALID_STATUS))
        elif status == schema.not_mentioned and config.drop_not_mentioned:
            dropped += 1
        else:
            pairs.append(TermStatusPair(term, status))
    return ExtractionResult(
        dialogue_id=window.dialogue_id,
        end_turn=window.end_turn,
        pairs=frozenset(pairs),
        diagnostics=Diagnostics(
            unknown_term_count=tally[UNKNOWN_TERM],
            invalid_status_count=invalid,
            dropped_not_mentioned_count=dropped,
        ),
    )


def extract_one_stage(
    window: Window,
    backend: GenerativeBackend,
    schema: Schema,
    config: ExtractionConfig,
    prompts: PromptConfig,
) -> ExtractionResult:
    """Single call returning 'term: status' pairs; the synthetic status is never used."""
    prompts = inference_prompts(prompts, include_not_mentioned=False)
    tally: Counter = Counter()
    text = _fit_window(window, backend, lambda w: render_dialogue(w, prompts))
    raw = _generate(backend, text, config.max_new_tokens_terms, "one_stage")
    pairs = parse_pairs_one_stage(raw, schema, config.term_parse_policy, prompts, tally)
    invalid = sum(1 for p in pairs if p.status == INVALID_STATUS)
    return ExtractionResult(
        dialogue_id=window.dialogue_id,
        end_turn=window.end_turn,
        pairs=frozenset(pairs),
        diagnostics=Diagnostics(
            unknown_term_count=tally[UNKNOWN_TERM],
            invalid_status_count=invalid,
            malformed_pair_count=tally[MALFORMED_PAIR],
        ),
    )


def extract_window(
    window: Window,
    backend: GenerativeBackend,
    schema: Schema,
    config: ExtractionConfig,
    prompts: PromptConfig,
) -> ExtractionResult:
    if config.mode == ONE_STAGE:
        return extract_one_stage(window, backend, schema, config, prompts)
    return extract_two_stage(window, backend, schema, config, prompts)


def extract_corpus(
    windows: Sequence[Window],
    backend: GenerativeBackend,
    schema: Schema,
    config: ExtractionConfig,
    prompts: PromptConfig,
) -> CorpusExtraction:
    """Extract every window, collecting per-window failures instead of aborting.

    Results come back in window order regardless of ``config.max_workers``;
    adapters must be safe for concurrent generate calls when workers > 1.
    """
    def run_one(window: Window) -> ExtractionResult | ExtractionFailure:
        try:
            return extract_window(window, backend, schema, config, prompts)
        except BackendError as exc:
            stage = str(exc).split(" stage:", 1)[0] if " stage:" in str(exc) else "generate"
            return ExtractionFailure(window.dialogue_id, window.end_turn, stage, str(exc))

    if config.max_workers > 1:
        with ThreadPoolExecutor(max_workers=config.max_workers) as pool:
            outcomes = list(pool.map(run_one, windows))
    else:
        outcomes = [run_one(w) for w in windows]

    extraction = CorpusExtraction()
    for outcome in outcomes:
        if isinstance(outcome, ExtractionFailure):
            extraction.failures.append(outcome)
        else:
            extraction.results.append(outcome)
    return extraction


def write_predictions(results: Iterable[ExtractionResult], path: str | Path) -> int:
    """Write the predictions file: one window per line, pairs sorted for stable bytes."""
    n = 0
    with open(path, "w", encoding="utf-8") as handle:
        for r in results:
            handle.write(json.dumps({
                "dialogue_id": r.dialogue_id,
                "end_turn": r.end_turn,
                "pairs": [{"term": p.term, "status": p.status} for p in sorted(r.pairs)],
                "diagnostics": r.diagnostics.to_dict(),
            }, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_predictions(source: str | Path | IO[str]) -> list[ExtractionResult]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as handle:
            return read_predictions(handle)
    results = []
    for lineno, line in enumerate(source, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"predictions line {lineno}: invalid JSON: {exc}") from exc
        results.append(ExtractionResult(
            dialogue_id=str(record["dialogue_id"]),
            end_turn=int(record["end_turn"]),
            pairs=frozenset(TermStatusPair(p["term"], p["status"]) for p in record.get("pairs", [])),
            diagnostics=Diagnostics.from_dict(record.get("diagnostics", {})),
        ))
    return results
