"""Seeded synthetic schemas and corpora.

Real medical-dialogue datasets in this task family are not redistributable,
so tests, demos, and the acceptance suite run on generated data. Dialogue
texts literally mention "<term> <status>" phrases, which keeps the mapping
from window text to gold pairs learnable by a small model and trivially
verifiable by eye.
"""

from __future__ import annotations

import argparse
import random
from pathlib import Path
from typing import Sequence

import yaml

from .corpus import DOCTOR, PATIENT, AnnotationEvent, Dialogue, Turn, write_corpus
from .schema import Schema, schema_from_dict

FILLER = ("okay", "please go on", "I see", "anything else", "let me check", "thanks")


def demo_schema() -> Schema:
    """A small hand-written cardiology-flavored schema used across the docs and tests."""
    return schema_from_dict({
        "version": "demo-en-1",
        "separator": ",",
        "categories": [
            {
                "name": "symptom",
                "status_candidates": ["appear", "absent", "unknown"],
                "terms": ["atrial fibrillation", "cardiopalmus", "dyspnea", "chest pain", "cough"],
            },
            {
                "name": "surgery",
                "status_candidates": ["done", "not done", "suggest", "deprecated", "unknown"],
                "terms": ["radiofrequency ablation", "stent implantation"],
            },
            {
                "name": "test",
                "status_candidates": ["done", "not done", "suggest", "abnormal", "normal"],
                "terms": ["thyroid function test", "electrocardiogram", "myocardial enzyme"],
            },
            {
                "name": "other_info",
                "status_candidates": ["has", "has not", "stopped"],
                "terms": ["smoking", "hypertension history"],
            },
        ],
        "locale_strings": {
            "not_mentioned": "not mentioned",
            "categories": {
                "symptom": "Symptom",
                "surgery": "Surgery",
                "test": "Test",
                "other_info": "Other Info",
            },
        },
    }, source="demo_schema")


def toy_schema() -> Schema:
    """Five terms, three statuses: the smallest schema worth training on."""
    return schema_from_dict({
        "version": "toy-1",
        "separator": ",",
        "categories": [
            {
                "name": "symptom",
                "status_candidates": ["present", "absent", "unknown"],
                "terms": ["cough", "fever", "headache", "nausea", "fatigue"],
            },
        ],
        "locale_strings": {"categories": {"symptom": "Symptom"}},
    }, source="toy_schema")


def synthetic_schema(category_sizes: Sequence[tuple[int, int]], separator: str = ",") -> Schema:
    """A schema with exact counts: one (n_terms, n_statuses) pair per category.

    Status names are distinct across categories, so the schema-wide distinct
    status count is the sum of the per-category counts.
    """
    categories = []
    for c, (n_terms, n_statuses) in enumerate(category_sizes):
        name = f"category_{chr(ord('a') + c)}"
        categories.append({
            "name": name,
            "status_candidates": [f"status {name[-1]}{j}" for j in range(n_statuses)],
            "terms": [f"term {name[-1]}{i:02d}" for i in range(n_terms)],
        })
    return schema_from_dict(
        {"version": f"synthetic-{len(category_sizes)}", "separator": separator, "categories": categories},
        source="synthetic_schema",
    )


def schema_to_yaml(schema: Schema) -> str:
    """Render a Schema back into its document format."""
    doc = {
        "version": schema.version,
        "separator": schema.separator,
        "categories": [
            {
                "name": c.name,
                "status_candidates": list(c.status_candidates),
                "terms": list(c.terms),
            }
            for c in schema.categories
        ],
        "locale_strings": {
            "not_mentioned": schema.not_mentioned,
            "categories": {c.name: c.display for c in schema.categories},
        },
    }
    return yaml.safe_dump(doc, sort_keys=False, allow_unicode=True)


def _speaker(index: int) -> str:
    return PATIENT if index % 2 == 0 else DOCTOR


def _event_text(events: Sequence[AnnotationEvent]) -> str:
    return " and ".join(f"{e.term} {e.status}" for e in events)


def synthetic_dialogues(
    schema: Schema,
    n_dialogues: int,
    seed: int,
    min_turns: int = 4,
    max_turns: int = 9,
    annotation_rate: float = 0.9,
    status_change_rate: float = 0.15,
    id_prefix: str = "d",
) -> list[Dialogue]:
    """General-purpose labeled dialogues.

    Each annotated turn carries one event whose phrase appears in the turn
    text. With ``status_change_rate`` an event revisits an earlier term with
    a different status, creating latest-status-wins material. Speakers
    alternate strictly, so merging adjacent turns is the identity.
    """
    rng = random.Random(seed)
    dialogues = []
    for d in range(n_dialogues):
        n_turns = rng.randint(min_turns, max_turns)
        events: list[AnnotationEvent] = []
        turns: list[Turn] = []
        used: dict[str, str] = {}
        for k in range(n_turns):
            turn_events: list[AnnotationEvent] = []
            if rng.random() < annotation_rate:
                revisit = used and rng.random() < status_change_rate
                if revisit:
                    term = rng.choice(sorted(used))
                    alternatives = [s for s in schema.status_candidates(term) if s != used[term]]
                    status = rng.choice(alternatives) if alternatives else used[term]
                else:
                    term = rng.choice(schema.terms)
                    # re-picking a seen term keeps its status; changes only
                    # happen through the revisit branch above
                    status = used.get(term) or rng.choice(schema.status_candidates(term))
                used[term] = status
                turn_events.append(AnnotationEvent(turn=k, term=term, status=status))
            text = _event_text(turn_events) if turn_events else rng.choice(FILLER)
            turns.append(Turn(speaker=_speaker(k), text=text, index=k))
            events.extend(turn_events)
        dialogues.append(Dialogue(
            id=f"{id_prefix}{d:05d}", turns=tuple(turns), events=tuple(events), labeled=True))
    return dialogues


def memorization_dialogues(
    schema: Schema,
    n_dialogues: int,
    seed: int,
    turns_per_dialogue: int = 5,
    id_prefix: str = "m",
) -> list[Dialogue]:
    """Dialogues built for training smoke tests: one event per turn, each term
    used at most once per dialogue, so every window's gold is unambiguous."""
    rng = random.Random(seed)
    dialogues = []
    for d in range(n_dialogues):
        terms = list(schema.terms)
        rng.shuffle(terms)
        terms = terms[:turns_per_dialogue]
        turns = []
        events = []
        for k in range(turns_per_dialogue):
            term = terms[k % len(terms)]
            status = rng.choice(schema.status_candidates(term))
            event = AnnotationEvent(turn=k, term=term, status=status)
            events.append(event)
            turns.append(Turn(speaker=_speaker(k), text=_event_text([event]), index=k))
        dialogues.append(Dialogue(
            id=f"{id_prefix}{d:05d}", turns=tuple(turns), events=tuple(events), labeled=True))
    return dialogues


def dialogues_with_turn_total(
    schema: Schema,
    n_dialogues: int,
    total_turns: int,
    seed: int,
    annotation_rate: float = 0.6,
    id_prefix: str = "b",
) -> list[Dialogue]:
    """Dialogues whose merged turn counts sum to exactly ``total_turns``."""
    if total_turns < n_dialogues:
        raise ValueError("need at least one turn per dialogue")
    base, extra = divmod(total_turns, n_dialogues)
    rng = random.Random(seed)
    dialogues = []
    for d in range(n_dialogues):
        n_turns = base + (1 if d < extra else 0)
        turns = []
        events = []
        for k in range(n_turns):
            if rng.random() < annotation_rate:
                term = rng.choice(schema.terms)
                status = rng.choice(schema.status_candidates(term))
                event = AnnotationEvent(turn=k, term=term, status=status)
                events.append(event)
                text = _event_text([event])
            else:
                text = rng.choice(FILLER)
            turns.append(Turn(speaker=_speaker(k), text=text, index=k))
        dialogues.append(Dialogue(
            id=f"{id_prefix}{d:05d}", turns=tuple(turns), events=tuple(events), labeled=True))
    return dialogues


def term_only_dialogues(
    schema: Schema,
    n_dialogues: int,
    seed: int,
    min_turns: int = 2,
    max_turns: int = 5,
    id_prefix: str = "t",
) -> list[Dialogue]:
    """Dialogues annotated with terms only (no statuses), for augmentation."""
    rng = random.Random(seed)
    dialogues = []
    for d in range(n_dialogues):
        n_turns = rng.randint(min_turns, max_turns)
        turns = []
        events = []
        for k in range(n_turns):
            if rng.random() < 0.8:
                term = rng.choice(schema.terms)
                events.append(AnnotationEvent(turn=k, term=term, status=None))
                text = f"{term} mentioned"
            else:
                text = rng.choice(FILLER)
            turns.append(Turn(speaker=_speaker(k), text=text, index=k))
        dialogues.append(Dialogue(
            id=f"{id_prefix}{d:05d}", turns=tuple(turns), events=tuple(events), labeled=False))
    return dialogues


def main(argv: Sequence[str] | None = None) -> int:
    """Write a self-contained demo dataset: schema, corpus splits, run config."""
    parser = argparse.ArgumentParser(description="generate a synthetic demo dataset")
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--dialogues", type=int, default=60)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--schema", choices=("demo", "toy"), default="toy")
    args = parser.parse_args(argv)

    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    schema = toy_schema() if args.schema == "toy" else demo_schema()
    (out / "schema.yaml").write_text(schema_to_yaml(schema), encoding="utf-8")

    n = args.dialogues
    if args.schema == "toy":
        train = memorization_dialogues(schema, n, args.seed, id_prefix="train")
        valid = memorization_dialogues(schema, max(4, n // 5), args.seed + 1, id_prefix="valid")
        test = memorization_dialogues(schema, max(4, n // 5), args.seed + 2, id_prefix="test")
    else:
        train = synthetic_dialogues(schema, n, args.seed, id_prefix="train")
        valid = synthetic_dialogues(schema, max(4, n // 5), args.seed + 1, id_prefix="valid")
        test = synthetic_dialogues(schema, max(4, n // 5), args.seed + 2, id_prefix="test")
    write_corpus(train, out / "train.jsonl")
    write_corpus(valid, out / "valid.jsonl")
    write_corpus(test, out / "test.jsonl")
    write_corpus(term_only_dialogues(schema, n, args.seed + 3), out / "term_only.jsonl")

    config = {
        "seed": args.seed,
        "schema": "schema.yaml",
        "output_dir": "run",
        "corpus": {"train": "train.jsonl", "valid": "valid.jsonl", "test": "test.jsonl"},
        "window_size": 5,
        "backend": {"kind": "tiny", "embed_dim": 64, "hidden_dim": 96, "seed": args.seed},
        "hyperparams": {
            "learning_rate": 3e-3, "warmup_steps": 20, "weight_decay": 0.01,
            "batch_size": 32, "epochs": 30, "seed": args.seed,
        },
    }
    (out / "config.yaml").write_text(yaml.safe_dump(config, sort_keys=False), encoding="utf-8")
    print(f"wrote demo dataset to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
