"""Extraction schema: categories, terms, and per-category status candidates.

A schema document is a YAML file::

    version: demo-1
    separator: ","
    categories:
      - name: symptom
        status_candidates: [appear, absent, unknown]
        terms: [chest pain, cough]
      - name: surgery
        status_candidates: [done, not done, suggest, deprecated, unknown]
        terms: [radiofrequency ablation]
    locale_strings:            # optional
      not_mentioned: not mentioned
      categories:
        symptom: Symptom
        surgery: Surgery

``separator`` is the token that joins items in generated target sequences.
Terms and statuses must not contain it (or the begin/end sentinels); this is
rejected at load time so that target-sequence parsing stays unambiguous.
``locale_strings`` holds display text used when rendering prompts; the
prompt text is data, the pipeline itself is language independent.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable

import yaml

DEFAULT_SEPARATOR = ","
DEFAULT_SOS = "[SOS]"
DEFAULT_SEP = "[SEP]"
DEFAULT_NOT_MENTIONED = "not mentioned"


class SchemaError(ValueError):
    """Malformed schema document or violated schema invariant."""


class UnknownTermError(KeyError):
    """Lookup of a term that is not defined in the schema."""


@dataclass(frozen=True)
class CategoryDef:
    """One category: its display name, ordered status candidates, and terms.

    Candidate order is the schema author's order and is significant: it is
    rendered verbatim into prompts, so it must be stable across runs.
    """

    name: str
    status_candidates: tuple[str, ...]
    terms: tuple[str, ...]
    display: str = ""

    def __post_init__(self) -> None:
        if not self.display:
            object.__setattr__(self, "display", self.name)


@dataclass(frozen=True)
class Schema:
    categories: tuple[CategoryDef, ...]
    version: str = ""
    separator: str = DEFAULT_SEPARATOR
    not_mentioned: str = DEFAULT_NOT_MENTIONED

    @cached_property
    def _owner(self) -> dict[str, str]:
        return {t: c.name for c in self.categories for t in c.terms}

    @cached_property
    def _term_index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.terms)}

    @cached_property
    def _by_name(self) -> dict[str, CategoryDef]:
        return {c.name: c for c in self.categories}

    @property
    def terms(self) -> tuple[str, ...]:
        """All terms in schema order (category order, then in-category order)."""
        return tuple(t for c in self.categories for t in c.terms)

    @property
    def status_names(self) -> tuple[str, ...]:
        """Distinct status names across all categories, first-seen order."""
        seen: dict[str, None] = {}
        for c in self.categories:
            for s in c.status_candidates:
                seen.setdefault(s)
        return tuple(seen)

    def category(self, name: str) -> CategoryDef:
        try:
            return self._by_name[name]
        except KeyError:
            raise SchemaError(f"unknown category: {name!r}") from None

    def category_of(self, term: str) -> str:
        """Name of the unique category owning ``term``."""
        try:
            return self._owner[term]
        except KeyError:
            raise UnknownTermError(term) from None

    def term_index(self, term: str) -> int:
        """Position of ``term`` in schema order; used for deterministic tie-breaks."""
        try:
            return self._term_index[term]
        except KeyError:
            raise UnknownTermError(term) from None

    def status_candidates(self, term: str, include_not_mentioned: bool = False) -> tuple[str, ...]:
        """Ordered candidates for ``term``'s category.

        The synthetic status is appended last iff ``include_not_mentioned``;
        it is never stored in the schema itself.
        """
        cat = self._by_name[self.category_of(term)]
        if include_not_mentioned:
            return cat.status_candidates + (self.not_mentioned,)
        return cat.status_candidates

    def __contains__(self, term: str) -> bool:
        return term in self._owner


def category_of(schema: Schema, term: str) -> str:
    return schema.category_of(term)


def status_candidates(schema: Schema, term: str, include_not_mentioned: bool = False) -> tuple[str, ...]:
    return schema.status_candidates(term, include_not_mentioned)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise SchemaError(message)


def _check_token(kind: str, value: str, separator: str, sentinels: Iterable[str]) -> None:
    _require(isinstance(value, str) and value.strip() != "", f"{kind} must be a non-empty string, got {value!r}")
    if separator in value:
        raise SchemaError(f"{kind} {value!r} contains the separator {separator!r}")
    for sentinel in sentinels:
        if sentinel in value:
            raise SchemaError(f"{kind} {value!r} contains the sentinel {sentinel!r}")


def schema_from_dict(
    data: dict[str, Any],
    source: str = "<dict>",
    sentinels: tuple[str, str] = (DEFAULT_SOS, DEFAULT_SEP),
) -> Schema:
    """Build and validate a Schema from already-parsed document data."""
    if not isinstance(data, dict):
        raise SchemaError(f"{source}: schema document must be a mapping, got {type(data).__name__}")

    separator = data.get("separator", DEFAULT_SEPARATOR)
    _require(isinstance(separator, str) and separator != "", f"{source}: separator must be a non-empty string")
    version = str(data.get("version", ""))

    locale = data.get("locale_strings") or {}
    _require(isinstance(locale, dict), f"{source}: locale_strings must be a mapping")
    not_mentioned = locale.get("not_mentioned", DEFAULT_NOT_MENTIONED)
    category_display = locale.get("categories") or {}

    raw_categories = data.get("categories")
    _require(isinstance(raw_categories, list) and len(raw_categories) > 0, f"{source}: no categories defined")

    categories: list[CategoryDef] = []
    seen_category_names: set[str] = set()
    owner: dict[str, str] = {}
    for i, raw in enumerate(raw_categories):
        where = f"{source}: categories[{i}]"
        _require(isinstance(raw, dict), f"{where} must be a mapping")
        name = raw.get("name")
        _require(isinstance(name, str) and name.strip() != "", f"{where}: missing category name")
        _require(name not in seen_category_names, f"{source}: duplicate category {name!r}")
        seen_category_names.add(name)

        candidates = raw.get("status_candidates")
        _require(isinstance(candidates, list) and len(candidates) > 0,
                 f"{where} ({name!r}): at least one status candidate is required")
        seen_statuses: set[str] = set()
        for status in candidates:
            _check_token(f"{where} status", status, separator, sentinels)
            _require(status not in seen_statuses, f"{where} ({name!r}): duplicate status {status!r}")
            seen_statuses.add(status)
            _require(status != not_mentioned,
                     f"{where} ({name!r}): {not_mentioned!r} is reserved and may not be a stored candidate")

        terms = raw.get("terms", [])
        _require(isinstance(terms, list), f"{where} ({name!r}): terms must be a list")
        for term in terms:
            _check_token(f"{where} term", term, separator, sentinels)
            if term in owner:
                raise SchemaError(f"{source}: duplicate term {term!r} (in {owner[term]!r} and {name!r})")
            owner[term] = name

        categories.append(CategoryDef(
            name=name,
            status_candidates=tuple(candidates),
            terms=tuple(terms),
            display=str(category_display.get(name, name)),
        ))

    _check_token(f"{source}: locale_strings.not_mentioned", not_mentioned, separator, sentinels)
    return Schema(
        categories=tuple(categories),
        version=version,
        separator=separator,
        not_mentioned=not_mentioned,
    )


def parse_schema(
    text: str,
    source: str = "<string>",
    sentinels: tuple[str, str] = (DEFAULT_SOS, DEFAULT_SEP),
) -> Schema:
    """Parse a schema document from YAML text."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark is not None else source
        raise SchemaError(f"{where}: invalid schema document: {exc}") from exc
    if data is None:
        raise SchemaError(f"{source}: empty schema document")
    return schema_from_dict(data, source=source, sentinels=sentinels)


def load_schema(path: str | Path, sentinels: tuple[str, str] = (DEFAULT_SOS, DEFAULT_SEP)) -> Schema:
    """Load and validate a schema document from a YAML file."""
    path = Path(path)
    return parse_schema(path.read_text(encoding="utf-8"), source=str(path), sentinels=sentinels)
