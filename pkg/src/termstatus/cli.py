"""Command-line workflow over frozen file artifacts.

Subcommands:

* ``prepare``  : corpus -> windowed corpus + training samples + stats
* ``train``    : samples -> checkpoint (validation-F1 checkpoint selection)
* ``predict``  : windows + checkpoint -> predictions file
* ``evaluate`` : predictions + gold corpus -> report (all levels and modes)
* ``analyze``  : predictions + gold corpus -> per-category / per-term-count /
  changed-status breakdown report

Every command reads one YAML run config (paths are resolved relative to the
config file) and writes a manifest recording the config snapshot, seeds,
schema version, and input fingerprints, so a run is reproducible from its
artifacts alone. There is no hidden state between commands.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import yaml

from .backend import (
    CorruptionSpec,
    Hyperparams,
    LossTrace,
    MockOracle,
    TrainableBackend,
    train,
)
from .corpus import (
    CorpusError,
    Dialogue,
    Window,
    ingest_dialogues,
    merge_adjacent_turns,
    read_windows,
    windowize,
    write_windows,
)
from .evaluation import (
    DEFAULT_TERM_COUNT_BUCKETS,
    FULL,
    MODES,
    PER_WINDOW_MEAN,
    POOLED_MICRO,
    EvalReport,
    WindowUnit,
    aggregate_windows,
    breakdown_by_category,
    breakdown_by_term_count,
    filter_changed_status,
    score_dialogue_level,
    units_from_results,
)
from .pipeline import (
    ONE_STAGE,
    Diagnostics,
    ExtractionConfig,
    extract_corpus,
    read_predictions,
    write_predictions,
)
from .prompting import PromptConfig, inference_prompts
from .samples import (
    AugmentConfig,
    Sample,
    augment_term_only,
    build_one_stage_samples,
    build_status_samples,
    build_term_samples,
    mix_batches,
    read_samples,
    sample_not_mentioned_negatives,
    write_samples,
)
from .schema import Schema, SchemaError, load_schema


class ConfigError(ValueError):
    """Bad or incomplete run configuration."""


@dataclass
class RunConfig:
    seed: int
    schema: Path
    output_dir: Path
    corpus: dict[str, Path]
    window_size: int = 5
    prompts: dict = field(default_factory=dict)
    extraction: dict = field(default_factory=dict)
    augment: dict | None = None
    hyperparams: dict = field(default_factory=dict)
    backend: dict = field(default_factory=lambda: {"kind": "oracle"})
    training_mode: str = "full_data"
    eval_every: int = 0
    analysis: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"run config not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: run config must be a mapping")
    if "seed" not in data:
        raise ConfigError(f"{path}: 'seed' is mandatory and never defaulted")
    base = path.parent

    def resolve(p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else base / p

    corpus_raw = data.get("corpus")
    if isinstance(corpus_raw, (str, Path)):
        corpus = {"train": resolve(corpus_raw)}
    elif isinstance(corpus_raw, dict):
        corpus = {split: resolve(p) for split, p in corpus_raw.items()}
    else:
        raise ConfigError(f"{path}: 'corpus' must be a path or a split->path mapping")

    augment = data.get("augment")
    if augment is not None:
        augment = dict(augment)
        augment["term_only_sources"] = tuple(
            str(resolve(p)) for p in augment.get("term_only_sources", ()))

    return RunConfig(
        seed=int(data["seed"]),
        schema=resolve(data.get("schema", "schema.yaml")),
        output_dir=resolve(data.get("output_dir", "run")),
        corpus=corpus,
        window_size=int(data.get("window_size", 5)),
        prompts=dict(data.get("prompts", {})),
        extraction=dict(data.get("extraction", {})),
        augment=augment,
        hyperparams=dict(data.get("hyperparams", {})),
        backend=dict(data.get("backend", {"kind": "oracle"})),
        training_mode=str(data.get("training_mode", "full_data")),
        eval_every=int(data.get("eval_every", 0)),
        analysis=dict(data.get("analysis", {})),
        raw=data,
    )


@dataclass
class RunContext:
    cfg: RunConfig
    schema: Schema
    prompts: PromptConfig
    extraction: ExtractionConfig
    hp: Hyperparams
    augment: AugmentConfig | None


def build_context(cfg: RunConfig) -> RunContext:
    schema = load_schema(cfg.schema)
    try:
        prompts = PromptConfig.for_schema(schema, **cfg.prompts)
        extraction = ExtractionConfig(**cfg.extraction)
        hp_kwargs = dict(cfg.hyperparams)
        hp_kwargs.setdefault("seed", cfg.seed)
        hp = Hyperparams(**hp_kwargs)
        augment = None
        if cfg.augment is not None:
            augment_kwargs = dict(cfg.augment)
            augment_kwargs.setdefault("rng_seed", cfg.seed)
            augment = AugmentConfig(**augment_kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad run config field: {exc}") from exc
    # Sample building and inference must advertise the same candidate lists,
    # so the extraction flag is the single source of truth for the synthetic
    # status.
    prompts = inference_prompts(prompts, extraction.include_not_mentioned)
    return RunContext(cfg, schema, prompts, extraction, hp, augment)


# -- manifests ---------------------------------------------------------------

def file_fingerprint(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(ctx: RunContext, command: str, inputs: Sequence[Path], outputs: Sequence[Path], counts: dict) -> Path:
    manifest = {
        "command": command,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "seed": ctx.cfg.seed,
        "schema_version": ctx.schema.version,
        "config": ctx.cfg.raw,
        "inputs": {str(p): file_fingerprint(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "counts": counts,
    }
    path = ctx.cfg.output_dir / f"manifest.{command}.json"
    path.write_text(json.dumps(manifest, indent=2, ensure_ascii=False, default=str), encoding="utf-8")
    return path


# -- backends ----------------------------------------------------------------

def build_backend(ctx: RunContext, windows: Sequence[Window] | None = None):
    spec = ctx.cfg.backend
    kind = spec.get("kind", "oracle")
    if kind == "oracle":
        if windows is None:
            raise ConfigError("the oracle backend needs prepared windows")
        corruption = None
        if spec.get("status_flip_rate") or spec.get("term_drop_rate") or spec.get("invalid_status_rate"):
            corruption = CorruptionSpec(
                status_flip_rate=float(spec.get("status_flip_rate", 0.0)),
                term_drop_rate=float(spec.get("term_drop_rate", 0.0)),
                invalid_status_rate=float(spec.get("invalid_status_rate", 0.0)),
                seed=int(spec.get("seed", ctx.cfg.seed)),
            )
        one_stage = ctx.extraction.mode == ONE_STAGE
        prompts = inference_prompts(ctx.prompts, False) if one_stage else ctx.prompts
        return MockOracle.from_windows(windows, ctx.schema, prompts, corruption, one_stage=one_stage)
    if kind == "tiny":
        from .tiny_seq2seq import TinySeq2Seq
        return TinySeq2Seq(
            embed_dim=int(spec.get("embed_dim", 64)),
            hidden_dim=int(spec.get("hidden_dim", 96)),
            max_input_tokens=int(spec.get("max_input_tokens", 256)),
            seed=int(spec.get("seed", ctx.cfg.seed)),
        )
    if kind == "import":
        target = spec.get("target", "")
        if ":" not in target:
            raise ConfigError("import backend needs target 'package.module:factory'")
        module_name, factory_name = target.split(":", 1)
        import importlib
        factory = getattr(importlib.import_module(module_name), factory_name)
        return factory(spec)
    raise ConfigError(f"unknown backend kind {kind!r}")


# -- prepare -----------------------------------------------------------------

def _load_split(ctx: RunContext, split: str) -> tuple[list[Dialogue], list[Window]]:
    path = ctx.cfg.corpus[split]
    dialogues = [merge_adjacent_turns(d) for d in ingest_dialogues(path, ctx.schema)]
    windows = [w for d in dialogues for w in windowize(d, ctx.cfg.window_size)]
    return dialogues, windows


def _build_training_samples(ctx: RunContext, windows: Sequence[Window]) -> tuple[list[Sample], list[Sample]]:
    """In-domain samples plus (separately) term-only augmentation samples."""
    if ctx.extraction.mode == ONE_STAGE:
        in_domain = build_one_stage_samples(windows, ctx.schema, ctx.prompts)
        return in_domain, []
    in_domain = build_term_samples(windows, ctx.schema, ctx.prompts)
    in_domain += build_status_samples(windows, ctx.schema, ctx.prompts)
    if ctx.augment is not None and ctx.extraction.include_not_mentioned:
        for window in windows:
            in_domain += sample_not_mentioned_negatives(window, ctx.schema, ctx.augment, ctx.prompts)
    term_only: list[Sample] = []
    if ctx.augment is not None and ctx.augment.term_only_sources:
        term_only = augment_term_only(
            ctx.augment.term_only_sources, ctx.schema, ctx.prompts,
            ctx.cfg.window_size, ctx.augment.term_only_cap)
    return in_domain, term_only


def cmd_prepare(args: argparse.Namespace) -> int:
    ctx = build_context(load_run_config(args.config))
    out = ctx.cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)

    outputs = []
    stats: dict = {"splits": {}}
    total_dialogues = 0
    total_windows = 0
    train_windows: list[Window] = []
    for split, path in ctx.cfg.corpus.items():
        dialogues, windows = _load_split(ctx, split)
        windows_path = out / f"windows.{split}.jsonl"
        write_windows(windows, windows_path)
        outputs.append(windows_path)
        gold_pairs = sum(len(w.gold or ()) for w in windows)
        stats["splits"][split] = {
            "dialogues": len(dialogues), "windows": len(windows), "gold_pairs": gold_pairs}
        total_dialogues += len(dialogues)
        total_windows += len(windows)
        if split == "train":
            train_windows = windows

    in_domain, term_only = _build_training_samples(ctx, train_windows)
    samples_path = out / "samples.train.jsonl"
    write_samples(in_domain, samples_path)
    outputs.append(samples_path)
    stats["samples"] = {"in_domain": len(in_domain)}
    if term_only:
        term_only_path = out / "samples.term_only.jsonl"
        write_samples(term_only, term_only_path)
        outputs.append(term_only_path)
        stats["samples"]["term_only"] = len(term_only)

    stats.update({
        "dialogues": total_dialogues,
        "windows": total_windows,
        "terms": len(ctx.schema.terms),
        "statuses": len(ctx.schema.status_names),
    })
    stats_path = out / "stats.json"
    stats_path.write_text(json.dumps(stats, indent=2), encoding="utf-8")
    outputs.append(stats_path)

    write_manifest(ctx, "prepare", [ctx.cfg.schema, *ctx.cfg.corpus.values()], outputs, stats)
    print(f"dialogues={total_dialogues} windows={total_windows} "
          f"terms={len(ctx.schema.terms)} statuses={len(ctx.schema.status_names)}")
    return 0


# -- train -------------------------------------------------------------------

def _validation_f1(ctx: RunContext, backend, windows: Sequence[Window]) -> float:
    extraction = extract_corpus(windows, backend, ctx.schema, ctx.extraction, ctx.prompts)
    gold = {w.key: (w.gold or frozenset()) for w in windows}
    units = units_from_results(extraction.results, gold)
    report = aggregate_windows(units, FULL, PER_WINDOW_MEAN)
    return report.f1 or 0.0


def _train_phase(
    ctx: RunContext,
    backend: TrainableBackend,
    samples: Sequence[Sample],
    hp: Hyperparams,
    seed_base: int,
    valid_windows: Sequence[Window] | None,
    checkpoint_path: Path | None,
    phase: str,
) -> dict:
    backend.prepare_training(hp)
    trace = LossTrace()
    eval_every = ctx.cfg.eval_every or max(1, hp.epochs // 10)
    best_f1 = -1.0
    best_epoch = -1
    for epoch in range(hp.epochs):
        trace.extend(train(backend, mix_batches(samples, hp.batch_size, seed_base + epoch), hp, prepare=False))
        if valid_windows and checkpoint_path and (epoch + 1) % eval_every == 0:
            f1 = _validation_f1(ctx, backend, valid_windows)
            if f1 > best_f1:
                best_f1, best_epoch = f1, epoch
                backend.save(checkpoint_path)
    if checkpoint_path:
        if valid_windows:
            f1 = _validation_f1(ctx, backend, valid_windows)
            if f1 > best_f1:
                best_f1, best_epoch = f1, hp.epochs - 1
                backend.save(checkpoint_path)
            else:
                backend.load(checkpoint_path)
        else:
            backend.save(checkpoint_path)
    summary = {"phase": phase, "samples": len(samples), "steps": len(trace)}
    if trace.losses:
        n = min(10, len(trace))
        summary["loss_first"] = trace.mean_first(n)
        summary["loss_last"] = trace.mean_last(n)
    if best_epoch >= 0:
        summary["best_epoch"] = best_epoch
        summary["best_valid_full_f1"] = best_f1
    return summary


def cmd_train(args: argparse.Namespace) -> int:
    ctx = build_context(load_run_config(args.config))
    out = ctx.cfg.output_dir
    samples_path = out / "samples.train.jsonl"
    if not samples_path.exists():
        raise ConfigError(f"{samples_path} not found; run prepare first")
    in_domain = read_samples(samples_path)
    term_only_path = out / "samples.term_only.jsonl"
    term_only = read_samples(term_only_path) if term_only_path.exists() else []

    is_oracle = ctx.cfg.backend.get("kind", "oracle") == "oracle"
    backend_windows = None
    if is_oracle:
        windows_path = out / "windows.train.jsonl"
        if not windows_path.exists():
            raise ConfigError(f"{windows_path} not found; run prepare first")
        backend_windows = read_windows(windows_path)
    backend = build_backend(ctx, windows=backend_windows)
    if not isinstance(backend, TrainableBackend):
        raise ConfigError(f"backend kind {ctx.cfg.backend.get('kind')!r} is not trainable")

    # Checkpoint selection needs a model whose state evolves; the oracle's
    # does not, so validation selection is skipped for it.
    valid_path = out / "windows.valid.jsonl"
    valid_windows = None
    if not is_oracle and valid_path.exists():
        valid_windows = read_windows(valid_path)
    checkpoint_path = out / "checkpoint.pt"

    if hasattr(backend, "fit"):
        backend.fit(in_domain + term_only)

    phases = []
    if ctx.cfg.training_mode == "low_resource":
        if ctx.extraction.mode == ONE_STAGE:
            raise ConfigError("the low-resource schedule applies to two-stage training only")
        mixed = in_domain + term_only
        if term_only:
            phases.append(_train_phase(ctx, backend, mixed, ctx.hp, ctx.hp.seed, None, None, "mixed"))
        phases.append(_train_phase(
            ctx, backend, in_domain, ctx.hp, ctx.hp.seed + 1, valid_windows, checkpoint_path, "finetune"))
    elif ctx.cfg.training_mode == "full_data":
        phases.append(_train_phase(
            ctx, backend, in_domain, ctx.hp, ctx.hp.seed, valid_windows, checkpoint_path, "main"))
    else:
        raise ConfigError(f"unknown training_mode {ctx.cfg.training_mode!r}")

    trace_path = out / "loss_trace.json"
    trace_path.write_text(json.dumps(phases, indent=2), encoding="utf-8")
    inputs = [samples_path] + ([term_only_path] if term_only else [])
    write_manifest(ctx, "train", inputs, [checkpoint_path, trace_path], {"phases": phases})
    for phase in phases:
        print(f"phase={phase['phase']} samples={phase['samples']} steps={phase['steps']}"
              + (f" best_valid_full_f1={phase['best_valid_full_f1']:.4f}" if "best_valid_full_f1" in phase else ""))
    return 0


# -- predict -----------------------------------------------------------------

def cmd_predict(args: argparse.Namespace) -> int:
    ctx = build_context(load_run_config(args.config))
    out = ctx.cfg.output_dir
    windows_path = out / f"windows.{args.split}.jsonl"
    if not windows_path.exists():
        raise ConfigError(f"{windows_path} not found; run prepare first")
    windows = read_windows(windows_path)

    backend = build_backend(ctx, windows=windows)
    checkpoint = Path(args.checkpoint) if args.checkpoint else out / "checkpoint.pt"
    # The oracle is rebuilt from the split's own windows; a checkpoint from
    # another split must not overwrite it.
    is_oracle = ctx.cfg.backend.get("kind", "oracle") == "oracle"
    if not is_oracle and hasattr(backend, "load") and checkpoint.exists():
        backend.load(checkpoint)

    extraction = extract_corpus(windows, backend, ctx.schema, ctx.extraction, ctx.prompts)
    predictions_path = out / f"predictions.{args.split}.jsonl"
    write_predictions(extraction.results, predictions_path)
    diagnostics = extraction.total_diagnostics().to_dict()
    counts = {
        "windows": len(windows),
        "results": len(extraction.results),
        "failures": len(extraction.failures),
        "diagnostics": diagnostics,
    }
    inputs = [windows_path] + ([checkpoint] if checkpoint.exists() else [])
    write_manifest(ctx, "predict", inputs, [predictions_path], counts)
    print(f"windows={len(windows)} results={len(extraction.results)} failures={len(extraction.failures)}")
    for failure in extraction.failures[:5]:
        print(f"  failed {failure.dialogue_id}/{failure.end_turn} [{failure.stage}]: {failure.message}",
              file=sys.stderr)
    return 0 if extraction.ok else 1


# -- evaluate / analyze ------------------------------------------------------

def _gold_for_split(ctx: RunContext, split: str) -> tuple[list[Dialogue], dict]:
    if split not in ctx.cfg.corpus:
        raise ConfigError(f"split {split!r} not present in the run config corpus mapping")
    dialogues = [merge_adjacent_turns(d) for d in ingest_dialogues(ctx.cfg.corpus[split], ctx.schema)]
    gold_windows = {
        w.key: (w.gold or frozenset())
        for d in dialogues for w in windowize(d, ctx.cfg.window_size)
    }
    return dialogues, gold_windows


def _aligned_units(results, gold_windows) -> list[WindowUnit]:
    pred_keys = {r.key for r in results}
    gold_keys = set(gold_windows)
    missing_pred = sorted(gold_keys - pred_keys)
    missing_gold = sorted(pred_keys - gold_keys)
    if missing_pred or missing_gold:
        raise ValueError(
            "predictions and gold windows are misaligned; "
            f"missing predictions for {missing_pred[:5]}, "
            f"predictions without gold for {missing_gold[:5]}")
    return units_from_results(results, gold_windows)


def _print_report_table(reports: dict[tuple[str, str], EvalReport]) -> None:
    print(f"{'level':<10}{'mode':<8}{'P':>9}{'R':>9}{'F1':>9}")
    for (level, mode), report in reports.items():
        print(f"{level:<10}{mode:<8}{report.precision:>9.4f}{report.recall:>9.4f}{report.f1:>9.4f}")


def cmd_evaluate(args: argparse.Namespace) -> int:
    ctx = build_context(load_run_config(args.config))
    out = ctx.cfg.output_dir
    predictions_path = Path(args.predictions) if args.predictions else out / f"predictions.{args.split}.jsonl"
    results = read_predictions(predictions_path)
    dialogues, gold_windows = _gold_for_split(ctx, args.split)
    units = _aligned_units(results, gold_windows)

    main_reports = {}
    report_doc: dict = {"window": {}, "dialogue": {}, "strategies": [PER_WINDOW_MEAN, POOLED_MICRO]}
    for mode in MODES:
        window_report = aggregate_windows(units, mode, PER_WINDOW_MEAN)
        dialogue_report = score_dialogue_level(results, dialogues, mode, PER_WINDOW_MEAN)
        main_reports[("window", mode)] = window_report
        main_reports[("dialogue", mode)] = dialogue_report
        report_doc["window"][mode] = {
            PER_WINDOW_MEAN: window_report.to_dict(),
            POOLED_MICRO: aggregate_windows(units, mode, POOLED_MICRO).to_dict(),
        }
        report_doc["dialogue"][mode] = {
            PER_WINDOW_MEAN: dialogue_report.to_dict(),
            POOLED_MICRO: score_dialogue_level(results, dialogues, mode, POOLED_MICRO).to_dict(),
        }

    total = sum((r.diagnostics for r in results), start=Diagnostics())
    report_doc["diagnostics"] = total.to_dict()
    report_doc["n_windows"] = len(units)
    report_doc["n_dialogues"] = len(dialogues)

    if args.by_category or args.by_term_count or args.changed_status:
        report_doc["breakdowns"] = _breakdown_doc(ctx, units, dialogues,
                                                  category=args.by_category,
                                                  term_count=args.by_term_count,
                                                  changed=args.changed_status)

    report_path = out / f"report.{args.split}.json"
    out.mkdir(parents=True, exist_ok=True)
    report_path.write_text(json.dumps(report_doc, indent=2), encoding="utf-8")
    write_manifest(ctx, "evaluate",
                   [predictions_path, ctx.cfg.corpus[args.split]], [report_path],
                   {"n_windows": len(units), "n_dialogues": len(dialogues)})
    _print_report_table(main_reports)
    return 0


def _buckets_from_config(ctx: RunContext):
    raw = ctx.cfg.analysis.get("term_count_buckets")
    if not raw:
        return DEFAULT_TERM_COUNT_BUCKETS
    return tuple((int(lo), None if hi is None else int(hi)) for lo, hi in raw)


def _breakdown_doc(ctx: RunContext, units, dialogues, category=True, term_count=True, changed=True) -> dict:
    doc: dict = {}
    if category:
        doc["by_category"] = {
            mode: {name: r.to_dict() for name, r in
                   breakdown_by_category(units, ctx.schema, mode).items()}
            for mode in MODES
        }
    if term_count:
        buckets = _buckets_from_config(ctx)
        doc["by_term_count"] = {
            mode: {label: r.to_dict() for label, r in
                   breakdown_by_term_count(units, mode, buckets).items()}
            for mode in MODES
        }
    if changed:
        changed_keys = {w.key for w in filter_changed_status(dialogues, ctx.cfg.window_size)}
        subset = [u for u in units if u.key in changed_keys]
        doc["changed_status"] = {"n_windows": len(subset)}
        for mode in MODES:
            if subset:
                doc["changed_status"][mode] = aggregate_windows(subset, mode).to_dict()
            else:
                doc["changed_status"][mode] = None
    return doc


def cmd_analyze(args: argparse.Namespace) -> int:
    ctx = build_context(load_run_config(args.config))
    out = ctx.cfg.output_dir
    predictions_path = Path(args.predictions) if args.predictions else out / f"predictions.{args.split}.jsonl"
    results = read_predictions(predictions_path)
    dialogues, gold_windows = _gold_for_split(ctx, args.split)
    units = _aligned_units(results, gold_windows)

    doc = _breakdown_doc(ctx, units, dialogues)
    analysis_path = out / f"analysis.{args.split}.json"
    out.mkdir(parents=True, exist_ok=True)
    analysis_path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
    write_manifest(ctx, "analyze",
                   [predictions_path, ctx.cfg.corpus[args.split]], [analysis_path],
                   {"n_windows": len(units)})

    for mode in MODES:
        for name, table in doc["by_category"][mode].items():
            f1 = table["f1"]
            shown = f"{f1:.4f}" if f1 is not None else "n/a"
            print(f"category={name} mode={mode} f1={shown} n={table['n_units']}")
    print(f"changed_status windows={doc['changed_status']['n_windows']}")
    return 0


# -- entry point ---------------------------------------------------------------

def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="termstatus", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=True, help="run config YAML")
        p.set_defaults(func=func)
        return p

    add("prepare", cmd_prepare)
    add("train", cmd_train)
    p_predict = add("predict", cmd_predict)
    p_predict.add_argument("--split", default="test")
    p_predict.add_argument("--checkpoint", default=None)
    p_eval = add("evaluate", cmd_evaluate)
    p_eval.add_argument("--split", default="test")
    p_eval.add_argument("--predictions", default=None)
    p_eval.add_argument("--by-category", action="store_true")
    p_eval.add_argument("--by-term-count", action="store_true")
    p_eval.add_argument("--changed-status", action="store_true")
    p_analyze = add("analyze", cmd_analyze)
    p_analyze.add_argument("--split", default="test")
    p_analyze.add_argument("--predictions", default=None)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SchemaError, CorpusError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
