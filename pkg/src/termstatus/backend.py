"""Generative-model abstraction: generation/training contracts and a mock oracle.

The neural model is an injected adapter; the framework only ever sees a
text-in/text-out generation call plus an optional training surface:

    prepare_training(hp)          -> None          (build optimizer state)
    train_step(batch)             -> float loss    (one gradient step)
    generate(request)             -> str           (greedy decoding)
    save(path) / load(path)

Greedy decoding is the contract everywhere: generation must be a pure
function of (adapter state, input text). The MockOracle below satisfies the
generation contract by replaying gold-derived outputs, which makes the whole
pipeline testable offline; its seeded corruption knobs inject controlled
errors for stage-decoupling and diagnostics tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence, runtime_checkable

from .corpus import Window
from .prompting import PromptConfig, build_status_input, build_term_input, serialize_status, serialize_terms
from .samples import Sample, canonical_term_order
from .schema import Schema


class BackendError(RuntimeError):
    """The adapter failed to produce an output."""


class TrainingError(RuntimeError):
    """Training went wrong (e.g. a non-finite loss)."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class GenerationRequest:
    input_text: str
    max_new_tokens: int = 128
    decode: str = "greedy"


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 2e-5
    warmup_steps: int = 1000
    weight_decay: float = 0.01
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError(f"invalid hyperparams: {self}")
        if self.warmup_steps < 0 or self.weight_decay < 0:
            raise ValueError(f"invalid hyperparams: {self}")


@runtime_checkable
class GenerativeBackend(Protocol):
    def generate(self, request: GenerationRequest) -> str: ...


@runtime_checkable
class TrainableBackend(GenerativeBackend, Protocol):
    def prepare_training(self, hp: Hyperparams) -> None: ...
    def train_step(self, batch: Sequence[Sample]) -> float: ...
    def save(self, path) -> None: ...
    def load(self, path) -> None: ...


@dataclass
class LossTrace:
    losses: list[float] = field(default_factory=list)

    def extend(self, other: "LossTrace") -> None:
        self.losses.extend(other.losses)

    def mean_first(self, n: int) -> float:
        head = self.losses[:n]
        return sum(head) / len(head)

    def mean_last(self, n: int) -> float:
        tail = self.losses[-n:] if n else []
        return sum(tail) / len(tail)

    def __len__(self) -> int:
        return len(self.losses)


def train(
    backend: TrainableBackend,
    batches: Iterable[Sequence[Sample]],
    hp: Hyperparams,
    prepare: bool = True,
) -> LossTrace:
    """Run gradient steps over a batch stream; the backend is updated in place.

    Raises TrainingError (with the step index) on a non-finite loss.
    """
    if prepare:
        backend.prepare_training(hp)
    trace = LossTrace()
    for step, batch in enumerate(batches):
        loss = backend.train_step(batch)
        if not math.isfinite(loss):
            raise TrainingError(f"non-finite loss {loss!r} at step {step}", step=step)
        trace.losses.append(loss)
    return trace


def low_resource_schedule(
    backend: TrainableBackend,
    mixed: Sequence[Sample],
    in_domain: Sequence[Sample],
    hp: Hyperparams,
    finetune_hp: Hyperparams | None = None,
) -> tuple[TrainableBackend, list[LossTrace]]:
    """Two-phase schedule: train on the mixed set, then fine-tune in domain.

    When the mixed set adds nothing beyond the in-domain set the schedule
    degenerates to a single phase. The fine-tune phase reuses ``hp`` unless
    ``finetune_hp`` overrides it. Returns the backend and one loss trace per
    phase that ran.
    """
    from .samples import epoch_stream

    if list(mixed) == list(in_domain):
        trace = train(backend, epoch_stream(in_domain, hp.batch_size, hp.epochs, hp.seed), hp)
        return backend, [trace]
    phase1 = train(backend, epoch_stream(mixed, hp.batch_size, hp.epochs, hp.seed), hp)
    hp2 = finetune_hp or hp
    phase2 = train(backend, epoch_stream(in_domain, hp2.batch_size, hp2.epochs, hp2.seed + 1), hp2)
    return backend, [phase1, phase2]


@dataclass(frozen=True)
class CorruptionSpec:
    """Seeded error injection for the oracle.

    ``status_flip_rate``: probability that a status output is replaced by a
    different valid candidate of the same category (never the synthetic
    "not mentioned", so term sets are untouched). ``term_drop_rate``:
    probability that each term is dropped from a term-stage output.
    ``invalid_status_rate``: probability that a status output is replaced by
    garbage no candidate list contains, exercising the INVALID path.
    """

    status_flip_rate: float = 0.0
    term_drop_rate: float = 0.0
    invalid_status_rate: float = 0.0
    seed: int = 0


#: Garbage emitted by ``invalid_status_rate`` corruption.
GARBLED_STATUS = "__garbled__"


class MockOracle:
    """A generation backend that replays gold-derived outputs.

    Outputs are precomputed per window (and per term for the status stage)
    from the same prompt builders the pipeline uses, so a lookup by input
    text is a lookup by (dialogue_id, end_turn[, term]). Unknown inputs
    raise BackendError: the oracle is a closed fixture, not a model.

    The training surface is a no-op (loss 0.0) so the whole command chain
    stays runnable offline; save/load persist the lookup table.
    """

    def __init__(self, lookup: dict[str, str]):
        self._lookup = dict(lookup)

    @classmethod
    def from_windows(
        cls,
        windows: Sequence[Window],
        schema: Schema,
        config: PromptConfig,
        corruption: CorruptionSpec | None = None,
        one_stage: bool = False,
    ) -> "MockOracle":
        from .prompting import render_dialogue, serialize_pairs_one_stage
        import hashlib
        import random

        def rng_for(*parts) -> random.Random:
            digest = hashlib.blake2b("|".join(str(p) for p in parts).encode(), digest_size=8).digest()
            return random.Random(int.from_bytes(digest, "big"))

        lookup: dict[str, str] = {}
        for window in windows:
            if window.gold is None:
                raise ValueError(f"oracle needs labeled windows; {window.key} has no gold")
            terms = canonical_term_order(window, schema)
            status_of = {p.term: p.status for p in window.gold}
            if corruption is not None and corruption.term_drop_rate > 0:
                rng = rng_for(corruption.seed, "terms", *window.key)
                terms = [t for t in terms if rng.random() >= corruption.term_drop_rate]
            if one_stage:
                pairs = [(t, status_of[t]) for t in terms]
                lookup[render_dialogue(window, config)] = serialize_pairs_one_stage(pairs, config)
                continue
            lookup[build_term_input(window, config)] = serialize_terms(terms, config)
            for term in status_of:
                status = status_of[term]
                if corruption is not None and corruption.status_flip_rate > 0:
                    rng = rng_for(corruption.seed, "status", window.dialogue_id, window.end_turn, term)
                    if rng.random() < corruption.status_flip_rate:
                        alternatives = [c for c in schema.status_candidates(term) if c != status]
                        if not alternatives:
                            raise ValueError(
                                f"cannot flip status for {term!r}: its category has a single candidate")
                        status = rng.choice(alternatives)
                if corruption is not None and corruption.invalid_status_rate > 0:
                    rng = rng_for(corruption.seed, "invalid", window.dialogue_id, window.end_turn, term)
                    if rng.random() < corruption.invalid_status_rate:
                        status = GARBLED_STATUS
                lookup[build_status_input(window, term, schema, config)] = serialize_status(status, config)
        return cls(lookup)

    def generate(self, request: GenerationRequest) -> str:
        if request.decode != "greedy":
            raise BackendError(f"oracle only supports greedy decoding, got {request.decode!r}")
        try:
            return self._lookup[request.input_text]
        except KeyError:
            head = request.input_text[:80]
            raise BackendError(f"input not in oracle fixture: {head!r}...") from None

    def prepare_training(self, hp: Hyperparams) -> None:
        pass

    def train_step(self, batch: Sequence[Sample]) -> float:
        return 0.0

    def save(self, path) -> None:
        import json

        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self._lookup, handle, ensure_ascii=False)

    def load(self, path) -> None:
        import json

        with open(path, encoding="utf-8") as handle:
            self._lookup = json.load(handle)
