from __future__ import annotations

import json

import pytest
import yaml

from termstatus.cli import ConfigError, load_run_config, main
from termstatus.corpus import write_corpus
from termstatus.synthetic import (
    demo_schema,
    schema_to_yaml,
    synthetic_dialogues,
    term_only_dialogues,
)


def write_dataset(root, n_dialogues=12, seed=3, **config_overrides):
    schema = demo_schema()
    (root / "schema.yaml").write_text(schema_to_yaml(schema), encoding="utf-8")
    write_corpus(synthetic_dialogues(schema, n_dialogues, seed, id_prefix="tr"), root / "train.jsonl")
    write_corpus(synthetic_dialogues(schema, 4, seed + 1, id_prefix="va"), root / "valid.jsonl")
    write_corpus(synthetic_dialogues(schema, 4, seed + 2, id_prefix="te"), root / "test.jsonl")
    config = {
        "seed": seed,
        "schema": "schema.yaml",
        "output_dir": "run",
        "corpus": {"train": "train.jsonl", "valid": "valid.jsonl", "test": "test.jsonl"},
        "window_size": 5,
        "backend": {"kind": "oracle"},
    }
    config.update(config_overrides)
    path = root / "config.yaml"
    path.write_text(yaml.safe_dump(config, sort_keys=False), encoding="utf-8")
    return path


def test_seed_is_mandatory(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("schema: s.yaml\ncorpus: c.jsonl\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="seed"):
        load_run_config(path)
    assert main(["prepare", "--config", str(path)]) == 1


def test_paths_resolve_relative_to_config(tmp_path):
    config = write_dataset(tmp_path)
    cfg = load_run_config(config)
    assert cfg.schema == tmp_path / "schema.yaml"
    assert cfg.corpus["train"] == tmp_path / "train.jsonl"
    assert cfg.output_dir == tmp_path / "run"


def test_prepare_writes_artifacts_and_stats(tmp_path, capsys):
    config = write_dataset(tmp_path)
    assert main(["prepare", "--config", str(config)]) == 0
    out = tmp_path / "run"
    for name in ("windows.train.jsonl", "windows.valid.jsonl", "windows.test.jsonl",
                 "samples.train.jsonl", "stats.json", "manifest.prepare.json"):
        assert (out / name).exists(), name
    stats = json.loads((out / "stats.json").read_text())
    assert stats["terms"] == 12
    assert stats["statuses"] == 12
    assert stats["windows"] == sum(s["windows"] for s in stats["splits"].values())
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert line.startswith("dialogues=") and "windows=" in line


def test_prepare_single_three_turn_dialogue(tmp_path, capsys):
    schema = demo_schema()
    (tmp_path / "schema.yaml").write_text(schema_to_yaml(schema), encoding="utf-8")
    record = {
        "id": "only",
        "turns": [
            {"speaker": "patient", "text": "cough appear bothers me"},
            {"speaker": "doctor", "text": "noted"},
            {"speaker": "patient", "text": "thanks"},
        ],
        "annotations": [{"turn": 0, "term": "cough", "status": "appear"}],
    }
    (tmp_path / "train.jsonl").write_text(json.dumps(record) + "\n", encoding="utf-8")
    config = tmp_path / "config.yaml"
    config.write_text(yaml.safe_dump({
        "seed": 1, "schema": "schema.yaml", "corpus": "train.jsonl", "output_dir": "run",
    }), encoding="utf-8")
    assert main(["prepare", "--config", str(config)]) == 0
    assert "windows=3" in capsys.readouterr().out


def test_oracle_end_to_end_scores_one(tmp_path, capsys):
    config = write_dataset(tmp_path)
    assert main(["prepare", "--config", str(config)]) == 0
    assert main(["predict", "--config", str(config), "--split", "test"]) == 0
    assert main(["evaluate", "--config", str(config), "--split", "test"]) == 0
    report = json.loads((tmp_path / "run" / "report.test.json").read_text())
    for level in ("window", "dialogue"):
        for mode in ("term", "full"):
            table = report[level][mode]["per_window_mean"]
            assert table["precision"] == 1.0
            assert table["recall"] == 1.0
            assert table["f1"] == 1.0
    assert report["diagnostics"]["unknown_term_count"] == 0


def test_predictions_are_deterministic_across_reruns(tmp_path):
    config = write_dataset(tmp_path)
    main(["prepare", "--config", str(config)])
    main(["predict", "--config", str(config), "--split", "test"])
    first = (tmp_path / "run" / "predictions.test.jsonl").read_bytes()
    main(["predict", "--config", str(config), "--split", "test"])
    assert (tmp_path / "run" / "predictions.test.jsonl").read_bytes() == first


def test_corrupted_oracle_reports_diagnostics_free_but_lower_f1(tmp_path):
    config = write_dataset(tmp_path, backend={"kind": "oracle", "status_flip_rate": 1.0})
    main(["prepare", "--config", str(config)])
    main(["predict", "--config", str(config), "--split", "test"])
    main(["evaluate", "--config", str(config), "--split", "test"])
    report = json.loads((tmp_path / "run" / "report.test.json").read_text())
    assert report["window"]["term"]["per_window_mean"]["f1"] == 1.0
    assert report["window"]["full"]["per_window_mean"]["f1"] < 1.0


def test_evaluate_rejects_misaligned_predictions(tmp_path, capsys):
    config = write_dataset(tmp_path)
    main(["prepare", "--config", str(config)])
    main(["predict", "--config", str(config), "--split", "test"])
    predictions = tmp_path / "run" / "predictions.test.jsonl"
    lines = predictions.read_text().splitlines()
    predictions.write_text("\n".join(lines[:-1]) + "\n", encoding="utf-8")
    assert main(["evaluate", "--config", str(config), "--split", "test"]) == 1
    assert "misaligned" in capsys.readouterr().err


def test_manifest_records_fingerprints(tmp_path):
    config = write_dataset(tmp_path)
    main(["prepare", "--config", str(config)])
    manifest = json.loads((tmp_path / "run" / "manifest.prepare.json").read_text())
    assert manifest["command"] == "prepare"
    assert manifest["seed"] == 3
    assert manifest["schema_version"] == "demo-en-1"
    assert all(len(d) == 64 for d in manifest["inputs"].values())
    assert str(tmp_path / "train.jsonl") in manifest["inputs"]


def test_analyze_emits_breakdowns(tmp_path, capsys):
    config = write_dataset(tmp_path, n_dialogues=20)
    main(["prepare", "--config", str(config)])
    main(["predict", "--config", str(config), "--split", "test"])
    assert main(["analyze", "--config", str(config), "--split", "test"]) == 0
    doc = json.loads((tmp_path / "run" / "analysis.test.json").read_text())
    assert set(doc["by_category"]["full"]) == {"symptom", "surgery", "test", "other_info"}
    assert set(doc["by_term_count"]["full"]) == {"num=0", "1<=num<=4", "num>=5"}
    assert "changed_status" in doc
    assert "category=symptom" in capsys.readouterr().out


def test_prepare_with_augmentation_counts(tmp_path):
    schema = demo_schema()
    write_corpus(term_only_dialogues(schema, 6, seed=9), tmp_path / "term_only.jsonl")
    config = write_dataset(
        tmp_path,
        extraction={"include_not_mentioned": True},
        augment={"negatives_per_window": 1, "rng_seed": 3,
                 "term_only_sources": ["term_only.jsonl"]},
    )
    main(["prepare", "--config", str(config)])
    stats = json.loads((tmp_path / "run" / "stats.json").read_text())
    split = stats["splits"]["train"]
    # one term sample per window, one status sample per gold pair, one negative
    # per window (pool is never exhausted with 12 schema terms)
    expected = split["windows"] * 2 + split["gold_pairs"]
    assert stats["samples"]["in_domain"] == expected
    assert stats["samples"]["term_only"] > 0
    samples_path = tmp_path / "run" / "samples.train.jsonl"
    assert sum(1 for line in samples_path.open() if '"not mentioned"' in line) == split["windows"]


def test_one_stage_mode_prepares_single_task(tmp_path):
    config = write_dataset(tmp_path, extraction={"mode": "one_stage"})
    main(["prepare", "--config", str(config)])
    stats = json.loads((tmp_path / "run" / "stats.json").read_text())
    assert stats["samples"]["in_domain"] == stats["splits"]["train"]["windows"]
    main(["predict", "--config", str(config), "--split", "test"])
    main(["evaluate", "--config", str(config), "--split", "test"])
    report = json.loads((tmp_path / "run" / "report.test.json").read_text())
    assert report["window"]["full"]["per_window_mean"]["f1"] == 1.0


def test_unknown_backend_kind(tmp_path):
    config = write_dataset(tmp_path, backend={"kind": "mystery"})
    main(["prepare", "--config", str(config)])
    assert main(["predict", "--config", str(config), "--split", "test"]) == 1


def test_invalid_status_corruption_shows_in_diagnostics(tmp_path):
    config = write_dataset(tmp_path, backend={"kind": "oracle", "invalid_status_rate": 1.0})
    main(["prepare", "--config", str(config)])
    main(["predict", "--config", str(config), "--split", "test"])
    manifest = json.loads((tmp_path / "run" / "manifest.predict.json").read_text())
    assert manifest["counts"]["diagnostics"]["invalid_status_count"] > 0


def test_large_single_category_corpus_bookkeeping(tmp_path, capsys):
    from termstatus.synthetic import dialogues_with_turn_total, synthetic_schema

    schema = synthetic_schema([(149, 3)])
    (tmp_path / "schema.yaml").write_text(schema_to_yaml(schema), encoding="utf-8")
    dialogues = dialogues_with_turn_total(schema, n_dialogues=2067, total_turns=87005, seed=1)
    write_corpus(dialogues, tmp_path / "train.jsonl")
    config = tmp_path / "config.yaml"
    config.write_text(yaml.safe_dump({
        "seed": 1, "schema": "schema.yaml", "corpus": "train.jsonl", "output_dir": "run",
    }), encoding="utf-8")
    assert main(["prepare", "--config", str(config)]) == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert line == "dialogues=2067 windows=87005 terms=149 statuses=3"


class TestTraining:
    def _toy_config(self, tmp_path, **overrides):
        from termstatus.synthetic import memorization_dialogues, toy_schema

        schema = toy_schema()
        (tmp_path / "schema.yaml").write_text(schema_to_yaml(schema), encoding="utf-8")
        write_corpus(memorization_dialogues(schema, 6, seed=3, id_prefix="tr"), tmp_path / "train.jsonl")
        write_corpus(memorization_dialogues(schema, 2, seed=4, id_prefix="va"), tmp_path / "valid.jsonl")
        write_corpus(memorization_dialogues(schema, 2, seed=5, id_prefix="te"), tmp_path / "test.jsonl")
        config = {
            "seed": 3,
            "schema": "schema.yaml",
            "output_dir": "run",
            "corpus": {"train": "train.jsonl", "valid": "valid.jsonl", "test": "test.jsonl"},
            "backend": {"kind": "tiny", "embed_dim": 32, "hidden_dim": 48},
            "hyperparams": {"learning_rate": 3e-3, "warmup_steps": 5, "weight_decay": 0.01,
                            "batch_size": 16, "epochs": 3},
            "eval_every": 3,
        }
        config.update(overrides)
        path = tmp_path / "config.yaml"
        path.write_text(yaml.safe_dump(config, sort_keys=False), encoding="utf-8")
        return path

    def test_full_data_training_writes_checkpoint(self, tmp_path):
        pytest.importorskip("torch")
        config = self._toy_config(tmp_path)
        assert main(["prepare", "--config", str(config)]) == 0
        assert main(["train", "--config", str(config)]) == 0
        out = tmp_path / "run"
        assert (out / "checkpoint.pt").exists()
        phases = json.loads((out / "loss_trace.json").read_text())
        assert [p["phase"] for p in phases] == ["main"]
        assert "best_valid_full_f1" in phases[0]
        assert main(["predict", "--config", str(config), "--split", "test"]) == 0

    def test_low_resource_training_runs_two_phases(self, tmp_path):
        pytest.importorskip("torch")
        from termstatus.synthetic import term_only_dialogues, toy_schema

        write_corpus(term_only_dialogues(toy_schema(), 4, seed=6), tmp_path / "term_only.jsonl")
        config = self._toy_config(
            tmp_path,
            training_mode="low_resource",
            extraction={"include_not_mentioned": True},
            augment={"negatives_per_window": 1, "rng_seed": 3,
                     "term_only_sources": ["term_only.jsonl"]},
        )
        main(["prepare", "--config", str(config)])
        assert main(["train", "--config", str(config)]) == 0
        phases = json.loads((tmp_path / "run" / "loss_trace.json").read_text())
        assert [p["phase"] for p in phases] == ["mixed", "finetune"]
        assert phases[0]["samples"] > phases[1]["samples"]

    def test_one_stage_training_runs(self, tmp_path):
        pytest.importorskip("torch")
        config = self._toy_config(tmp_path, extraction={"mode": "one_stage"})
        main(["prepare", "--config", str(config)])
        assert main(["train", "--config", str(config)]) == 0
        phases = json.loads((tmp_path / "run" / "loss_trace.json").read_text())
        assert phases[0]["samples"] == 30  # one sample per training window

    def test_oracle_chain_is_fully_offline(self, tmp_path, capsys):
        config = self._toy_config(tmp_path, backend={"kind": "oracle"})
        for command in ("prepare", "train", "predict", "evaluate"):
            extra = ["--split", "test"] if command in ("predict", "evaluate") else []
            assert main([command, "--config", str(config)] + extra) == 0, command
        report = json.loads((tmp_path / "run" / "report.test.json").read_text())
        assert report["window"]["full"]["per_window_mean"]["f1"] == 1.0
        for command in ("prepare", "train", "predict", "evaluate"):
            assert (tmp_path / "run" / f"manifest.{command}.json").exists()
