"""Training-sample construction and multi-task batch mixing.

One run trains a single model on two tagged subtasks: term generation
(window text -> serialized term list) and status generation (window text +
status prompt -> status string). Low-resource runs add two kinds of
augmentation: stage-one samples from term-only corpora, and synthetic
status samples whose target is the "not mentioned" status, drawn from
schema terms absent from the window.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Final, Iterable, Iterator, Sequence

from .corpus import (
    Dialogue,
    Window,
    ingest_term_only,
    merge_adjacent_turns,
    windowize,
)
from .prompting import (
    PromptConfig,
    build_status_input,
    build_term_input,
    render_dialogue,
    serialize_pairs_one_stage,
    serialize_status,
    serialize_terms,
)
from .schema import Schema

TERM_GENERATION: Final[str] = "term_generation"
STATUS_GENERATION: Final[str] = "status_generation"
#: Baseline task: one sequence carrying terms and statuses together.
ONE_STAGE_GENERATION: Final[str] = "one_stage_generation"
TASKS: Final[tuple[str, str]] = (TERM_GENERATION, STATUS_GENERATION)


@dataclass(frozen=True)
class SampleMeta:
    dialogue_id: str
    end_turn: int
    term: str | None = None


@dataclass(frozen=True)
class Sample:
    """A task-tagged (input text, target text) training pair."""

    task: str
    input_text: str
    target_text: str
    meta: SampleMeta


@dataclass(frozen=True)
class AugmentConfig:
    """Low-resource augmentation knobs.

    ``negatives_per_window``: an int is an exact per-window count; a float is
    a ratio of the window's positive count (rounded). The default 1.0 keeps
    positives and negatives balanced. ``term_only_cap`` optionally limits how
    many term-only samples are mixed in (None = use all).
    """

    negatives_per_window: int | float = 1.0
    rng_seed: int = 0
    term_only_sources: tuple[str, ...] = ()
    term_only_cap: int | None = None


def canonical_term_order(window: Window, schema: Schema) -> list[str]:
    """Deterministic target order for a window's terms.

    Terms are ordered by first-mention turn, ties broken by schema order.
    Windows without event info (e.g. rebuilt from a windowed file) fall back
    to schema order alone.
    """
    if window.events:
        first_turn: dict[str, int] = {}
        for event in window.events:
            first_turn.setdefault(event.term, event.turn)
        return sorted(first_turn, key=lambda t: (first_turn[t], schema.term_index(t)))
    if window.gold:
        return sorted({p.term for p in window.gold}, key=schema.term_index)
    return []


def build_term_samples(windows: Sequence[Window], schema: Schema, config: PromptConfig) -> list[Sample]:
    """One term-generation sample per window; empty gold yields an empty list target."""
    samples = []
    for window in windows:
        if window.gold is None and not window.events:
            raise ValueError(f"window {window.key} carries no gold annotations")
        samples.append(Sample(
            task=TERM_GENERATION,
            input_text=build_term_input(window, config),
            target_text=serialize_terms(canonical_term_order(window, schema), config),
            meta=SampleMeta(window.dialogue_id, window.end_turn),
        ))
    return samples


def build_status_samples(windows: Sequence[Window], schema: Schema, config: PromptConfig) -> list[Sample]:
    """One status-generation sample per gold (term, status) pair."""
    samples = []
    for window in windows:
        if window.gold is None:
            raise ValueError(f"window {window.key} carries no gold annotations")
        status_of = {p.term: p.status for p in window.gold}
        for term in canonical_term_order(window, schema):
            samples.append(Sample(
                task=STATUS_GENERATION,
                input_text=build_status_input(window, term, schema, config),
                target_text=serialize_status(status_of[term], config),
                meta=SampleMeta(window.dialogue_id, window.end_turn, term=term),
            ))
    return samples


def build_one_stage_samples(windows: Sequence[Window], schema: Schema, config: PromptConfig) -> list[Sample]:
    """Baseline samples: plain dialogue in, 'term: status' pair sequence out."""
    samples = []
    for window in windows:
        if window.gold is None:
            raise ValueError(f"window {window.key} carries no gold annotations")
        status_of = {p.term: p.status for p in window.gold}
        pairs = [(term, status_of[term]) for term in canonical_term_order(window, schema)]
        samples.append(Sample(
            task=ONE_STAGE_GENERATION,
            input_text=render_dialogue(window, config),
            target_text=serialize_pairs_one_stage(pairs, config),
            meta=SampleMeta(window.dialogue_id, window.end_turn),
        ))
    return samples


def term_samples_from_dialogues(
    dialogues: Iterable[Dialogue],
    schema: Schema,
    config: PromptConfig,
    window_size: int = 5,
) -> list[Sample]:
    """Stage-one samples from term-only dialogues, windowized like labeled data."""
    samples = []
    for dialogue in dialogues:
        for window in windowize(merge_adjacent_turns(dialogue), window_size):
            samples.append(Sample(
                task=TERM_GENERATION,
                input_text=build_term_input(window, config),
                target_text=serialize_terms(canonical_term_order(window, schema), config),
                meta=SampleMeta(window.dialogue_id, window.end_turn),
            ))
    return samples


def augment_term_only(
    sources: Iterable[str | Path],
    schema: Schema,
    config: PromptConfig,
    window_size: int = 5,
    cap: int | None = None,
) -> list[Sample]:
    """Read term-only corpora and emit term-generation samples only."""
    samples: list[Sample] = []
    for source in sources:
        dialogues = ingest_term_only(source, schema)
        samples.extend(term_samples_from_dialogues(dialogues, schema, config, window_size))
    if cap is not None:
        samples = samples[:cap]
    return samples


def _window_rng(seed: int, window: Window) -> random.Random:
    digest = hashlib.blake2b(
        f"{seed}|{window.dialogue_id}|{window.end_turn}".encode("utf-8"),
        digest_size=8,
    ).digest()
    return random.Random(int.from_bytes(digest, "big"))


def _negative_count(spec: int | float, positives: int, pool: int) -> int:
    if isinstance(spec, bool):
        raise TypeError("negatives_per_window must be an int count or float ratio")
    k = spec if isinstance(spec, int) else int(math.floor(spec * positives + 0.5))
    return max(0, min(k, pool))


def sample_not_mentioned_negatives(
    window: Window,
    schema: Schema,
    augment: AugmentConfig,
    config: PromptConfig,
) -> list[Sample]:
    """Status samples for terms absent from the window, targeting "not mentioned".

    Terms are drawn uniformly without replacement from the schema terms minus
    the window's gold terms; the draw is deterministic given the augment seed
    and the window key. Inputs must advertise the synthetic status, so the
    prompt config has to have include_not_mentioned set.
    """
    if not config.include_not_mentioned:
        raise ValueError("negative sampling requires include_not_mentioned prompts")
    if window.gold is None:
        raise ValueError(f"window {window.key} carries no gold annotations")
    gold_terms = {p.term for p in window.gold}
    pool = [t for t in schema.terms if t not in gold_terms]
    k = _negative_count(augment.negatives_per_window, len(gold_terms), len(pool))
    if k == 0:
        return []
    rng = _window_rng(augment.rng_seed, window)
    drawn = rng.sample(pool, k)
    return [
        Sample(
            task=STATUS_GENERATION,
            input_text=build_status_input(window, term, schema, config),
            target_text=serialize_status(schema.not_mentioned, config),
            meta=SampleMeta(window.dialogue_id, window.end_turn, term=term),
        )
        for term in drawn
    ]


def mix_batches(
    samples: Sequence[Sample],
    batch_size: int,
    seed: int,
    policy: str = "shuffle",
) -> Iterator[list[Sample]]:
    """One training epoch: every sample exactly once, chunked into batches.

    ``shuffle`` (default) interleaves both tasks in a single seeded uniform
    shuffle. ``alternate`` shuffles each task separately and alternates
    task-homogeneous batches while both streams last.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    rng = random.Random(seed)
    if policy == "shuffle":
        order = list(samples)
        rng.shuffle(order)
        for start in range(0, len(order), batch_size):
            yield order[start:start + batch_size]
    elif policy == "alternate":
        streams = []
        for task in TASKS:
            stream = [s for s in samples if s.task == task]
            rng.shuffle(stream)
            if stream:
                streams.append(stream)
        offsets = [0] * len(streams)
        while any(offsets[i] < len(streams[i]) for i in range(len(streams))):
            for i, stream in enumerate(streams):
                if offsets[i] < len(stream):
                    yield stream[offsets[i]:offsets[i] + batch_size]
                    offsets[i] += batch_size
    else:
        raise ValueError(f"unknown mixing policy {policy!r}")


def epoch_stream(
    samples: Sequence[Sample],
    batch_size: int,
    epochs: int,
    seed: int,
    policy: str = "shuffle",
) -> Iterator[list[Sample]]:
    """Concatenated batch stream over several epochs, reshuffled per epoch."""
    for epoch in range(epochs):
        yield from mix_batches(samples, batch_size, seed + epoch, policy)


def write_samples(samples: Iterable[Sample], path: str | Path) -> int:
    """Persist samples as line-delimited JSON; returns the count written."""
    n = 0
    with open(path, "w", encoding="utf-8") as handle:
        for s in samples:
            meta = {"dialogue_id": s.meta.dialogue_id, "end_turn": s.meta.end_turn}
            if s.meta.term is not None:
                meta["term"] = s.meta.term
            handle.write(json.dumps(
                {"task": s.task, "input_text": s.input_text, "target_text": s.target_text, "meta": meta},
                ensure_ascii=False,
            ) + "\n")
            n += 1
    return n


def read_samples(source: str | Path | IO[str]) -> list[Sample]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as handle:
            return read_samples(handle)
    samples = []
    for line in source:
        line = line.strip()
        if not line:
            continue
        record = json.loads(line)
        meta = record.get("meta", {})
        samples.append(Sample(
            task=record["task"],
            input_text=record["input_text"],
            target_text=record["target_text"],
            meta=SampleMeta(
                dialogue_id=meta.get("dialogue_id", ""),
                end_turn=int(meta.get("end_turn", -1)),
                term=meta.get("term"),
            ),
        ))
    return samples
