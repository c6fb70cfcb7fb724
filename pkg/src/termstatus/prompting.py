"""Model input construction and target-sequence (de)serialization.

Both extraction stages share one input shape: the speaker-tagged dialogue
text followed by a task prompt. The term stage appends a fixed prompt
("the mentioned medical terms" by default); the status stage appends a
rendered template carrying the term's category and ordered status
candidates straight from the schema.

Target sequences are sentinel-wrapped, separator-joined strings, e.g.
``[SOS]atrial fibrillation,cardiopalmus[SEP]``. Parsers are total: they
tolerate arbitrary model output and surface anything unparseable through
diagnostics tallies instead of raising.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from typing import Final, Iterable, Literal, Sequence

from .corpus import DOCTOR, PATIENT, TermStatusPair, Window
from .schema import DEFAULT_SEP, DEFAULT_SOS, Schema

TermParsePolicy = Literal["strict", "keep_unknown"]

#: Marker returned by status parsing when the output is not a candidate.
#: Never coerced to a real status; evaluation decides the penalty.
INVALID_STATUS: Final[str] = "__invalid__"

#: Delimiter between term and status in the one-stage target format.
PAIR_DELIMITER: Final[str] = ": "

DEFAULT_TERM_PROMPT = "the mentioned medical terms"
DEFAULT_STATUS_TEMPLATE = "{category}: {term}'s status. Status candidates: {candidates}"
DEFAULT_SPEAKER_LABELS = {PATIENT: "Patient", DOCTOR: "Doctor"}

# Diagnostics tally keys shared with the pipeline.
UNKNOWN_TERM = "unknown_term"
MALFORMED_PAIR = "malformed_pair"


@dataclass(frozen=True)
class PromptConfig:
    """Everything needed to render byte-stable inputs and targets.

    ``separator`` must match the schema the run uses (see
    :meth:`for_schema`). In the status prompt the candidate list is joined
    by the separator plus a single space, which renders the default ","
    as the readable "done, not done, ...".
    """

    term_prompt: str = DEFAULT_TERM_PROMPT
    status_template: str = DEFAULT_STATUS_TEMPLATE
    include_not_mentioned: bool = False
    sos: str = DEFAULT_SOS
    sep: str = DEFAULT_SEP
    separator: str = ","
    speaker_labels: dict[str, str] | None = None
    wrap_status_targets: bool = False

    def label(self, speaker: str) -> str:
        labels = self.speaker_labels or DEFAULT_SPEAKER_LABELS
        return labels.get(speaker, speaker)

    @classmethod
    def for_schema(cls, schema: Schema, **overrides) -> "PromptConfig":
        """A config whose separator is taken from the schema."""
        overrides.setdefault("separator", schema.separator)
        return cls(**overrides)


def render_dialogue(window: Window, config: PromptConfig) -> str:
    """Speaker-tagged turn texts joined in order: 'Patient: ... Doctor: ...'."""
    if not window.turns:
        raise ValueError(f"window {window.key} has no turns")
    return " ".join(f"{config.label(t.speaker)}: {t.text}" for t in window.turns)


def build_term_input(window: Window, config: PromptConfig) -> str:
    """Dialogue text followed by the term-stage prompt."""
    return f"{render_dialogue(window, config)} {config.term_prompt}"


def render_status_prompt(term: str, schema: Schema, config: PromptConfig) -> str:
    """The status-stage prompt for one term: category, term, candidate list."""
    category = schema.category(schema.category_of(term))
    candidates = schema.status_candidates(term, config.include_not_mentioned)
    joined = (config.separator + " ").join(candidates)
    return config.status_template.format(category=category.display, term=term, candidates=joined)


def build_status_input(window: Window, term: str, schema: Schema, config: PromptConfig) -> str:
    """Dialogue text followed by the schema-grounded status prompt for ``term``."""
    return f"{render_dialogue(window, config)} {render_status_prompt(term, schema, config)}"


def serialize_terms(terms: Sequence[str], config: PromptConfig) -> str:
    """Sentinel-wrapped, separator-joined term list; empty list -> '[SOS][SEP]'."""
    return f"{config.sos}{config.separator.join(terms)}{config.sep}"


def serialize_status(status: str, config: PromptConfig) -> str:
    """Status-stage target text; sentinel-wrapped only if configured."""
    if config.wrap_status_targets:
        return f"{config.sos}{status}{config.sep}"
    return status


def serialize_pairs_one_stage(pairs: Sequence[TermStatusPair | tuple[str, str]], config: PromptConfig) -> str:
    """One-stage target: sentinel-wrapped 'term: status' items, separator-joined."""
    items = []
    for term, status in pairs:
        if PAIR_DELIMITER in term or PAIR_DELIMITER in status:
            raise ValueError(
                f"{PAIR_DELIMITER!r} may not occur inside a term or status: ({term!r}, {status!r})")
        items.append(f"{term}{PAIR_DELIMITER}{status}")
    return f"{config.sos}{config.separator.join(items)}{config.sep}"


def strip_sentinels(text: str, config: PromptConfig) -> str:
    """Remove a leading begin sentinel and trailing end sentinel, if present."""
    text = text.strip()
    if text.startswith(config.sos):
        text = text[len(config.sos):]
    if text.endswith(config.sep):
        text = text[:-len(config.sep)]
    return text.strip()


def _split_fragments(text: str, config: PromptConfig) -> list[str]:
    body = strip_sentinels(text, config)
    if not body:
        return []
    return [frag.strip() for frag in body.split(config.separator) if frag.strip()]


def parse_terms(
    text: str,
    schema: Schema,
    policy: TermParsePolicy = "strict",
    config: PromptConfig = PromptConfig(),
    tally: Counter | None = None,
) -> list[str]:
    """Parse a term-stage output into an ordered, duplicate-free term list.

    Parsing is total. Duplicates keep their first occurrence. Under
    ``strict``, fragments not in the schema are dropped and counted under
    ``tally["unknown_term"]``; under ``keep_unknown`` they are returned
    verbatim.
    """
    terms: list[str] = []
    seen: set[str] = set()
    for fragment in _split_fragments(text, config):
        if fragment in seen:
            continue
        if fragment not in schema:
            if tally is not None:
                tally[UNKNOWN_TERM] += 1
            if policy == "strict":
                continue
        seen.add(fragment)
        terms.append(fragment)
    return terms


def parse_status(text: str, candidates: Iterable[str], config: PromptConfig = PromptConfig()) -> str:
    """Map a status-stage output onto a candidate, or INVALID_STATUS.

    The cleaned text must equal a candidate exactly; near-misses are never
    coerced.
    """
    cleaned = strip_sentinels(text, config)
    for candidate in candidates:
        if cleaned == candidate:
            return candidate
    return INVALID_STATUS


def parse_pairs_one_stage(
    text: str,
    schema: Schema,
    policy: TermParsePolicy = "strict",
    config: PromptConfig = PromptConfig(),
    tally: Counter | None = None,
) -> list[TermStatusPair]:
    """Parse a one-stage output into (term, status) pairs.

    Fragments without the pair delimiter are dropped and counted under
    ``tally["malformed_pair"]``. Unknown terms follow ``policy`` as in
    :func:`parse_terms`. A status outside the term's candidates becomes
    INVALID_STATUS. The first occurrence of a term wins.
    """
    pairs: list[TermStatusPair] = []
    seen: set[str] = set()
    for fragment in _split_fragments(text, config):
        if PAIR_DELIMITER not in fragment:
            if tally is not None:
                tally[MALFORMED_PAIR] += 1
            continue
        term, status = fragment.split(PAIR_DELIMITER, 1)
        term = term.strip()
        status = status.strip()
        if term in seen:
            continue
        if term not in schema:
            if tally is not None:
                tally[UNKNOWN_TERM] += 1
            if policy == "strict":
                continue
            seen.add(term)
            pairs.append(TermStatusPair(term, status))
            continue
        candidates = schema.status_candidates(term)
        seen.add(term)
        pairs.append(TermStatusPair(term, status if status in candidates else INVALID_STATUS))
    return pairs


def inference_prompts(config: PromptConfig, include_not_mentioned: bool) -> PromptConfig:
    """The prompt config the pipeline actually uses at inference time."""
    if config.include_not_mentioned == include_not_mentioned:
        return config
    return replace(config, include_not_mentioned=include_not_mentioned)
