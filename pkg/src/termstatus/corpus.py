"""Dialogue ingestion and windowing.

A corpus file is line-delimited JSON, one dialogue per line::

    {"id": "d001",
     "turns": [{"speaker": "patient", "text": "..."}, ...],
     "annotations": [{"turn": 0, "term": "chest pain", "status": "appear"}, ...]}

Annotations are per-turn events; the same term may appear several times with
different statuses as the conversation progresses. Term-only corpora (used
for stage-one augmentation) use the same format with the ``status`` field
omitted from every annotation.

Windows are trailing slices: a dialogue with n turns yields exactly n
windows, window k covering turns ``max(0, k - window_size + 1) .. k``. Each
window's gold label set is reduced to the latest status per term within the
window's span.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import IO, Iterable, Iterator, NamedTuple

from .schema import Schema, UnknownTermError

PATIENT = "patient"
DOCTOR = "doctor"
SPEAKERS = (PATIENT, DOCTOR)

DEFAULT_WINDOW_SIZE = 5


class CorpusError(ValueError):
    """Malformed corpus record or annotation that violates the schema."""


class TermStatusPair(NamedTuple):
    """One extracted or annotated fact."""

    term: str
    status: str


@dataclass(frozen=True)
class Turn:
    speaker: str
    text: str
    index: int


@dataclass(frozen=True)
class AnnotationEvent:
    """A (term, status) observation attached to one turn.

    ``status`` is None in term-only corpora.
    """

    turn: int
    term: str
    status: str | None


@dataclass(frozen=True)
class Dialogue:
    id: str
    turns: tuple[Turn, ...]
    events: tuple[AnnotationEvent, ...] = ()
    labeled: bool = True


@dataclass(frozen=True)
class Window:
    """A trailing slice of up to window_size turns ending at ``end_turn``.

    ``gold`` is None for unlabeled (term-only) data; an empty frozenset means
    "labeled, and nothing is mentioned". ``events`` keeps the raw per-turn
    annotation events of the covered span so that target ordering and
    changed-status analysis stay available after windowing.
    """

    dialogue_id: str
    end_turn: int
    turns: tuple[Turn, ...]
    gold: frozenset[TermStatusPair] | None
    events: tuple[AnnotationEvent, ...] = ()

    @property
    def start_turn(self) -> int:
        return self.turns[0].index

    @property
    def key(self) -> tuple[str, int]:
        return (self.dialogue_id, self.end_turn)


def normalize_text(text: str) -> str:
    """Collapse whitespace runs to single spaces and strip the ends."""
    return " ".join(text.split())


def reduce_latest_status(events: Iterable[AnnotationEvent | tuple[str, str]]) -> frozenset[TermStatusPair]:
    """Keep one pair per term, carrying the status of the term's last event.

    Events must already be ordered chronologically (turn index, then
    within-turn order). Events without a status are skipped.
    """
    latest: dict[str, str] = {}
    for event in events:
        if isinstance(event, AnnotationEvent):
            term, status = event.term, event.status
        else:
            term, status = event
        if status is None:
            continue
        latest[term] = status
    return frozenset(TermStatusPair(t, s) for t, s in latest.items())


def dedup_pairs(pairs: Iterable[TermStatusPair | tuple[str, str]]) -> frozenset[TermStatusPair]:
    """Collapse exact duplicates; distinct statuses for one term are kept."""
    return frozenset(TermStatusPair(*p) for p in pairs)


def merge_adjacent_turns(dialogue: Dialogue) -> Dialogue:
    """Concatenate consecutive same-speaker turns into one turn.

    Texts are joined with a single space, annotation events are re-indexed
    onto the merged turn, and speakers strictly alternate afterwards.
    """
    if not dialogue.turns:
        return dialogue
    merged: list[Turn] = []
    index_map: dict[int, int] = {}
    for turn in dialogue.turns:
        if merged and merged[-1].speaker == turn.speaker:
            merged[-1] = replace(merged[-1], text=f"{merged[-1].text} {turn.text}")
        else:
            merged.append(Turn(speaker=turn.speaker, text=turn.text, index=len(merged)))
        index_map[turn.index] = len(merged) - 1
    events = tuple(replace(e, turn=index_map[e.turn]) for e in dialogue.events)
    return replace(dialogue, turns=tuple(merged), events=events)


def windowize(dialogue: Dialogue, window_size: int = DEFAULT_WINDOW_SIZE) -> list[Window]:
    """Slice a dialogue into one trailing window per turn.

    Window k ends at turn k and contains the trailing min(window_size, k+1)
    turns; its gold set is the latest status per term over the covered span.
    """
    if window_size < 1:
        raise ValueError(f"window_size must be >= 1, got {window_size}")
    if not dialogue.turns:
        raise ValueError(f"dialogue {dialogue.id!r} has no turns")
    windows: list[Window] = []
    for k in range(len(dialogue.turns)):
        start = max(0, k - window_size + 1)
        span_events = tuple(e for e in dialogue.events if start <= e.turn <= k)
        gold = reduce_latest_status(span_events) if dialogue.labeled else None
        windows.append(Window(
            dialogue_id=dialogue.id,
            end_turn=k,
            turns=dialogue.turns[start:k + 1],
            gold=gold,
            events=span_events,
        ))
    return windows


def _iter_json_lines(source: str | Path | IO[str]) -> Iterator[tuple[int, dict]]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as handle:
            yield from _iter_json_lines(handle)
        return
    for lineno, line in enumerate(source, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise CorpusError(f"line {lineno}: record must be an object")
        yield lineno, record


def _parse_turns(record: dict, lineno: int, dialogue_id: str) -> tuple[Turn, ...]:
    raw_turns = record.get("turns")
    if not isinstance(raw_turns, list) or not raw_turns:
        raise CorpusError(f"line {lineno}: dialogue {dialogue_id!r} has no turns")
    turns: list[Turn] = []
    for i, raw in enumerate(raw_turns):
        if not isinstance(raw, dict):
            raise CorpusError(f"line {lineno}: dialogue {dialogue_id!r} turn {i} must be an object")
        speaker = raw.get("speaker")
        if speaker not in SPEAKERS:
            raise CorpusError(
                f"line {lineno}: dialogue {dialogue_id!r} turn {i}: unknown speaker {speaker!r}")
        text = normalize_text(str(raw.get("text", "")))
        if not text:
            raise CorpusError(f"line {lineno}: dialogue {dialogue_id!r} turn {i}: empty text")
        turns.append(Turn(speaker=speaker, text=text, index=i))
    return tuple(turns)


def _parse_events(
    record: dict,
    lineno: int,
    dialogue_id: str,
    n_turns: int,
    schema: Schema,
    require_status: bool,
) -> tuple[AnnotationEvent, ...]:
    raw_annotations = record.get("annotations", [])
    if not isinstance(raw_annotations, list):
        raise CorpusError(f"line {lineno}: dialogue {dialogue_id!r}: annotations must be a list")
    events: list[AnnotationEvent] = []
    for raw in raw_annotations:
        if not isinstance(raw, dict) or "turn" not in raw or "term" not in raw:
            raise CorpusError(
                f"line {lineno}: dialogue {dialogue_id!r}: annotation must carry 'turn' and 'term'")
        turn = raw["turn"]
        term = raw["term"]
        if not isinstance(turn, int) or not 0 <= turn < n_turns:
            raise CorpusError(
                f"line {lineno}: dialogue {dialogue_id!r}: annotation turn {turn!r} out of range")
        try:
            schema.category_of(term)
        except UnknownTermError:
            raise CorpusError(
                f"line {lineno}: dialogue {dialogue_id!r} turn {turn}: unknown term {term!r}") from None
        status = raw.get("status")
        if require_status:
            if status not in schema.status_candidates(term):
                raise CorpusError(
                    f"line {lineno}: dialogue {dialogue_id!r} turn {turn}: "
                    f"status {status!r} is not valid for term {term!r}")
        elif status is not None:
            raise CorpusError(
                f"line {lineno}: dialogue {dialogue_id!r} turn {turn}: "
                f"term-only corpus must not carry a status (got {status!r})")
        events.append(AnnotationEvent(turn=turn, term=term, status=status))
    # Chronological order: by turn, file order within a turn.
    events.sort(key=lambda e: e.turn)
    return tuple(events)


def ingest_dialogues(source: str | Path | IO[str], schema: Schema) -> list[Dialogue]:
    """Read a fully annotated corpus, validating every term and status."""
    dialogues: list[Dialogue] = []
    seen_ids: set[str] = set()
    for lineno, record in _iter_json_lines(source):
        dialogue_id = str(record.get("id", ""))
        if not dialogue_id:
            raise CorpusError(f"line {lineno}: missing dialogue id")
        if dialogue_id in seen_ids:
            raise CorpusError(f"line {lineno}: duplicate dialogue id {dialogue_id!r}")
        seen_ids.add(dialogue_id)
        turns = _parse_turns(record, lineno, dialogue_id)
        events = _parse_events(record, lineno, dialogue_id, len(turns), schema, require_status=True)
        dialogues.append(Dialogue(id=dialogue_id, turns=turns, events=events, labeled=True))
    return dialogues


def ingest_term_only(source: str | Path | IO[str], schema: Schema) -> list[Dialogue]:
    """Read a term-only corpus: annotations carry terms but never statuses."""
    dialogues: list[Dialogue] = []
    for lineno, record in _iter_json_lines(source):
        dialogue_id = str(record.get("id", f"line{lineno}"))
        turns = _parse_turns(record, lineno, dialogue_id)
        events = _parse_events(record, lineno, dialogue_id, len(turns), schema, require_status=False)
        dialogues.append(Dialogue(id=dialogue_id, turns=turns, events=events, labeled=False))
    return dialogues


def write_corpus(dialogues: Iterable[Dialogue], path: str | Path) -> None:
    """Write dialogues back out in the corpus format."""
    with open(path, "w", encoding="utf-8") as handle:
        for d in dialogues:
            record = {
                "id": d.id,
                "turns": [{"speaker": t.speaker, "text": t.text} for t in d.turns],
                "annotations": [
                    {"turn": e.turn, "term": e.term}
                    | ({"status": e.status} if e.status is not None else {})
                    for e in d.events
                ],
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def write_windows(windows: Iterable[Window], path: str | Path) -> None:
    """Persist pre-windowed data: {dialogue_id, end_turn, turns, gold} per line."""
    with open(path, "w", encoding="utf-8") as handle:
        for w in windows:
            record: dict = {
                "dialogue_id": w.dialogue_id,
                "end_turn": w.end_turn,
                "turns": [{"speaker": t.speaker, "text": t.text} for t in w.turns],
            }
            if w.gold is not None:
                record["gold"] = [
                    {"term": p.term, "status": p.status} for p in sorted(w.gold)
                ]
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_windows(source: str | Path | IO[str]) -> list[Window]:
    """Read a pre-windowed file written by :func:`write_windows`."""
    windows: list[Window] = []
    for lineno, record in _iter_json_lines(source):
        dialogue_id = str(record.get("dialogue_id", ""))
        if not dialogue_id or "end_turn" not in record:
            raise CorpusError(f"line {lineno}: window record needs dialogue_id and end_turn")
        end_turn = int(record["end_turn"])
        raw_turns = record.get("turns") or []
        first_index = end_turn - len(raw_turns) + 1
        turns = tuple(
            Turn(speaker=raw["speaker"], text=normalize_text(raw["text"]), index=first_index + i)
            for i, raw in enumerate(raw_turns)
        )
        gold = None
        if "gold" in record:
            gold = frozenset(TermStatusPair(p["term"], p["status"]) for p in record["gold"])
        windows.append(Window(
            dialogue_id=dialogue_id, end_turn=end_turn, turns=turns, gold=gold))
    return windows
