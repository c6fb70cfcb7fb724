from __future__ import annotations

import pytest

from termstatus.corpus import AnnotationEvent, Dialogue, Turn, windowize
from termstatus.prompting import PromptConfig
from termstatus.synthetic import demo_schema, toy_schema


def make_consult_dialogue() -> Dialogue:
    """A 5-turn cardiology consult whose final window carries six gold pairs.

    The thyroid function test changes status (suggest -> done) inside the
    window, exercising latest-status reduction and the changed-status filter.
    """
    texts = [
        ("patient", "I was told I have atrial fibrillation and want advice"),
        ("doctor", "do you notice cardiopalmus or dyspnea day to day"),
        ("patient", "no but there is chest pain some evenings"),
        ("doctor", "get a thyroid function test first, radiofrequency ablation is an option if it is normal"),
        ("patient", "the thyroid function test is already done"),
    ]
    events = [
        AnnotationEvent(0, "atrial fibrillation", "appear"),
        AnnotationEvent(2, "cardiopalmus", "absent"),
        AnnotationEvent(2, "dyspnea", "absent"),
        AnnotationEvent(2, "chest pain", "appear"),
        AnnotationEvent(3, "thyroid function test", "suggest"),
        AnnotationEvent(3, "radiofrequency ablation", "suggest"),
        AnnotationEvent(4, "thyroid function test", "done"),
    ]
    turns = tuple(Turn(speaker=s, text=t, index=i) for i, (s, t) in enumerate(texts))
    return Dialogue(id="consult", turns=turns, events=tuple(events))


CONSULT_FINAL_PAIRS = {
    ("atrial fibrillation", "appear"),
    ("cardiopalmus", "absent"),
    ("dyspnea", "absent"),
    ("chest pain", "appear"),
    ("radiofrequency ablation", "suggest"),
    ("thyroid function test", "done"),
}


@pytest.fixture(scope="session")
def schema():
    return demo_schema()


@pytest.fixture(scope="session")
def tiny_schema():
    return toy_schema()


@pytest.fixture(scope="session")
def prompts(schema):
    return PromptConfig.for_schema(schema)


@pytest.fixture
def consult_dialogue():
    return make_consult_dialogue()


@pytest.fixture
def consult_window(consult_dialogue):
    return windowize(consult_dialogue, window_size=5)[-1]
