"""Scoring protocol: term/full modes, window/dialogue levels, analysis slices.

Scoring rules, per window:

* Term mode matches on terms only (the pair's status is ignored, and the
  pred/gold sides are first projected to de-duplicated term sets); full mode
  matches on exact (term, status) pairs.
* Empty-gold rule: a window whose gold set is empty scores (1, 1, 1) when the
  prediction is empty too, and (0, 0, 0) otherwise. This is a per-window
  rule, which is why the default aggregation averages per-window scores.
  Pooled micro-average is provided as a cross-check: it pools TP/FP/FN over
  the windows that have gold and reports the empty-rule windows as counts.
* Dialogue level merges each dialogue's window predictions with
  last-writer-wins per term, and compares against the latest status per term
  over the dialogue's full annotation stream.

Invalid statuses coming out of the pipeline count as a present term in term
mode and can never match any gold status in full mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

from .corpus import Dialogue, TermStatusPair, Window, reduce_latest_status, windowize
from .pipeline import ExtractionResult
from .schema import Schema, UnknownTermError

TERM = "term"
FULL = "full"
MODES = (TERM, FULL)

WINDOW_LEVEL = "window"
DIALOGUE_LEVEL = "dialogue"

PER_WINDOW_MEAN = "per_window_mean"
POOLED_MICRO = "pooled_micro"

DEFAULT_TERM_COUNT_BUCKETS = ((0, 0), (1, 4), (5, None))

PairSet = frozenset[TermStatusPair]


class Score(NamedTuple):
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class WindowUnit:
    """One scoring unit: a prediction set against a gold set."""

    key: tuple[str, int]
    pred: PairSet
    gold: PairSet


@dataclass
class EvalReport:
    level: str
    mode: str
    strategy: str
    precision: float | None
    recall: float | None
    f1: float | None
    n_units: int
    n_empty_gold: int = 0
    n_empty_correct: int = 0
    pooled_counts: tuple[int, int, int] | None = None
    breakdowns: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "level": self.level,
            "mode": self.mode,
            "strategy": self.strategy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "n_units": self.n_units,
            "n_empty_gold": self.n_empty_gold,
            "n_empty_correct": self.n_empty_correct,
        }
        if self.pooled_counts is not None:
            out["pooled_counts"] = {
                "tp": self.pooled_counts[0],
                "fp": self.pooled_counts[1],
                "fn": self.pooled_counts[2],
            }
        if self.breakdowns:
            out["breakdowns"] = {
                name: {key: r.to_dict() for key, r in table.items()}
                for name, table in self.breakdowns.items()
            }
        return out


def _project(pairs: Iterable[TermStatusPair], mode: str) -> frozenset:
    if mode == TERM:
        return frozenset(p.term for p in pairs)
    if mode == FULL:
        return frozenset(TermStatusPair(*p) for p in pairs)
    raise ValueError(f"unknown mode {mode!r}")


def match_counts(pred: Iterable[TermStatusPair], gold: Iterable[TermStatusPair], mode: str) -> tuple[int, int, int]:
    """Raw (TP, FP, FN) under the mode's projection; no empty rule applied."""
    pred_proj = _project(pred, mode)
    gold_proj = _project(gold, mode)
    tp = len(pred_proj & gold_proj)
    return tp, len(pred_proj) - tp, len(gold_proj) - tp


def _prf(tp: int, fp: int, fn: int) -> Score:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Score(precision, recall, f1)


def score_window(pred: Iterable[TermStatusPair], gold: Iterable[TermStatusPair], mode: str) -> Score:
    """Per-window precision/recall/F1 with the empty-gold rule."""
    gold = list(gold)
    pred = list(pred)
    if not gold:
        return Score(1.0, 1.0, 1.0) if not pred else Score(0.0, 0.0, 0.0)
    return _prf(*match_counts(pred, gold, mode))


def aggregate_windows(units: Sequence[WindowUnit], mode: str, strategy: str = PER_WINDOW_MEAN) -> EvalReport:
    """Aggregate per-unit scores into one report.

    ``per_window_mean`` averages each unit's Score (units with empty gold
    contribute their empty-rule score). ``pooled_micro`` pools TP/FP/FN over
    units with non-empty gold; the empty-rule units are reported as counts.
    """
    if not units:
        raise ValueError("cannot aggregate an empty unit list")
    n_empty_gold = sum(1 for u in units if not u.gold)
    n_empty_correct = sum(1 for u in units if not u.gold and not u.pred)
    pooled_counts = None

    if strategy == PER_WINDOW_MEAN:
        scores = [score_window(u.pred, u.gold, mode) for u in units]
        n = len(scores)
        precision = sum(s.precision for s in scores) / n
        recall = sum(s.recall for s in scores) / n
        f1 = sum(s.f1 for s in scores) / n
    elif strategy == POOLED_MICRO:
        tp = fp = fn = 0
        for u in units:
            if not u.gold:
                continue
            dtp, dfp, dfn = match_counts(u.pred, u.gold, mode)
            tp, fp, fn = tp + dtp, fp + dfp, fn + dfn
        precision, recall, f1 = _prf(tp, fp, fn)
        pooled_counts = (tp, fp, fn)
    else:
        raise ValueError(f"unknown aggregation strategy {strategy!r}")

    return EvalReport(
        level=WINDOW_LEVEL,
        mode=mode,
        strategy=strategy,
        precision=precision,
        recall=recall,
        f1=f1,
        n_units=len(units),
        n_empty_gold=n_empty_gold,
        n_empty_correct=n_empty_correct,
        pooled_counts=pooled_counts,
    )


def merge_dialogue(results: Sequence[ExtractionResult]) -> PairSet:
    """Union a dialogue's window predictions, later windows overwriting per term."""
    status_of: dict[str, str] = {}
    for result in sorted(results, key=lambda r: r.end_turn):
        for pair in sorted(result.pairs):
            status_of[pair.term] = pair.status
    return frozenset(TermStatusPair(t, s) for t, s in status_of.items())


def dialogue_gold(dialogue: Dialogue) -> PairSet:
    """Latest status per term over the dialogue's whole annotation stream."""
    return reduce_latest_status(dialogue.events)


def score_dialogue_level(
    results: Sequence[ExtractionResult],
    dialogues: Sequence[Dialogue],
    mode: str,
    strategy: str = PER_WINDOW_MEAN,
) -> EvalReport:
    """Merge window predictions per dialogue and score against dialogue gold.

    Dialogues with no prediction entries are scored against an empty
    prediction; predictions for unknown dialogues are an error.
    """
    by_dialogue: dict[str, list[ExtractionResult]] = {}
    for result in results:
        by_dialogue.setdefault(result.dialogue_id, []).append(result)
    known = {d.id for d in dialogues}
    unknown = sorted(set(by_dialogue) - known)
    if unknown:
        raise ValueError(f"predictions for dialogues not in gold: {unknown[:5]}")
    units = [
        WindowUnit(
            key=(d.id, -1),
            pred=merge_dialogue(by_dialogue.get(d.id, [])),
            gold=dialogue_gold(d),
        )
        for d in dialogues
    ]
    report = aggregate_windows(units, mode, strategy)
    report.level = DIALOGUE_LEVEL
    return report


def _restrict(pairs: Iterable[TermStatusPair], schema: Schema, category: str) -> PairSet:
    kept = []
    for pair in pairs:
        try:
            owner = schema.category_of(pair.term)
        except UnknownTermError:
            continue
        if owner == category:
            kept.append(pair)
    return frozenset(kept)


def breakdown_by_category(
    units: Sequence[WindowUnit],
    schema: Schema,
    mode: str,
    strategy: str = PER_WINDOW_MEAN,
) -> dict[str, EvalReport]:
    """Per-category reports over category-restricted pair sets.

    Under per-window averaging, windows where both restricted sides are
    empty are excluded from that category's scoring; a category with no
    remaining units gets an empty report (scores None) rather than a perfect
    one. Under pooled aggregation, restricted TP/FP/FN are pooled over the
    same windows the overall pool uses (those with non-empty unrestricted
    gold), so the per-category counts sum exactly to the overall pooled
    counts as long as every predicted term is a schema term.
    """
    reports: dict[str, EvalReport] = {}
    for category in schema.categories:
        restricted = []
        for unit in units:
            pred = _restrict(unit.pred, schema, category.name)
            gold = _restrict(unit.gold, schema, category.name)
            if not pred and not gold:
                continue
            restricted.append(WindowUnit(unit.key, pred, gold))

        if strategy == POOLED_MICRO:
            tp = fp = fn = 0
            for unit in units:
                if not unit.gold:
                    continue
                dtp, dfp, dfn = match_counts(
                    _restrict(unit.pred, schema, category.name),
                    _restrict(unit.gold, schema, category.name),
                    mode,
                )
                tp, fp, fn = tp + dtp, fp + dfp, fn + dfn
            precision, recall, f1 = _prf(tp, fp, fn)
            reports[category.name] = EvalReport(
                level=WINDOW_LEVEL, mode=mode, strategy=strategy,
                precision=precision, recall=recall, f1=f1,
                n_units=len(restricted), pooled_counts=(tp, fp, fn),
            )
        elif restricted:
            reports[category.name] = aggregate_windows(restricted, mode, strategy)
        else:
            reports[category.name] = EvalReport(
                level=WINDOW_LEVEL, mode=mode, strategy=strategy,
                precision=None, recall=None, f1=None, n_units=0,
            )
    return reports


def _bucket_label(lo: int, hi: int | None) -> str:
    if hi is None:
        return f"num>={lo}"
    if lo == hi:
        return f"num={lo}"
    return f"{lo}<=num<={hi}"


def _validate_buckets(buckets: Sequence[tuple[int, int | None]]) -> None:
    ordered = sorted(buckets, key=lambda b: b[0])
    expected_lo = 0
    for i, (lo, hi) in enumerate(ordered):
        if lo != expected_lo:
            raise ValueError(f"buckets must partition the non-negative integers; gap/overlap at {lo}")
        if hi is None:
            if i != len(ordered) - 1:
                raise ValueError("only the last bucket may be unbounded")
            return
        if hi < lo:
            raise ValueError(f"bucket ({lo}, {hi}) is empty")
        expected_lo = hi + 1
    raise ValueError("the last bucket must be unbounded")


def breakdown_by_term_count(
    units: Sequence[WindowUnit],
    mode: str,
    buckets: Sequence[tuple[int, int | None]] = DEFAULT_TERM_COUNT_BUCKETS,
    strategy: str = PER_WINDOW_MEAN,
) -> dict[str, EvalReport]:
    """Reports per bucket of |gold terms|; buckets must partition 0, 1, 2, ..."""
    _validate_buckets(buckets)
    reports: dict[str, EvalReport] = {}
    for lo, hi in buckets:
        members = [
            u for u in units
            if lo <= len({p.term for p in u.gold}) <= (hi if hi is not None else float("inf"))
        ]
        label = _bucket_label(lo, hi)
        if members:
            reports[label] = aggregate_windows(members, mode, strategy)
        else:
            reports[label] = EvalReport(
                level=WINDOW_LEVEL, mode=mode, strategy=strategy,
                precision=None, recall=None, f1=None, n_units=0,
            )
    return reports


def filter_changed_status(dialogues: Iterable[Dialogue], window_size: int = 5) -> list[Window]:
    """Windows where some term's status changes within the window's span."""
    selected = []
    for dialogue in dialogues:
        for window in windowize(dialogue, window_size):
            statuses: dict[str, set[str]] = {}
            for event in window.events:
                if event.status is not None:
                    statuses.setdefault(event.term, set()).add(event.status)
            if any(len(seen) >= 2 for seen in statuses.values()):
                selected.append(window)
    return selected


def units_from_results(
    results: Sequence[ExtractionResult],
    gold_windows: Mapping[tuple[str, int], PairSet],
) -> list[WindowUnit]:
    """Pair prediction results with gold sets by (dialogue_id, end_turn) key."""
    missing = [r.key for r in results if r.key not in gold_windows]
    if missing:
        raise ValueError(f"predictions without matching gold windows: {missing[:5]}")
    return [WindowUnit(key=r.key, pred=r.pairs, gold=gold_windows[r.key]) for r in results]
