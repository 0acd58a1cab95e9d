#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
QA Tests for the Experiment Pipeline
====================================

Runs the whole experiment on a tiny configuration and checks:
- Byte-identical reports for identical configs
- Per-cell decomposability across child-size ladders
- Output-directory protection, resume and locking
- Report rendering, config validation, seed sweep summaries and the CLI
"""

import json
import sys
from pathlib import Path

import pytest
import yaml

project_root = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(project_root))

from src.cli import main_experiment, main_score, main_synth  # noqa: E402
from src.pipeline.config import ConfigError, ExperimentConfig  # noqa: E402
from src.pipeline.experiment import ExperimentRunner, LockHeld, OutputExists, run_experiment  # noqa: E402
from src.pipeline.report import (  # noqa: E402
    DAGGER,
    NOT_AVAILABLE,
    Cell,
    EvalReport,
    SignificanceEntry,
    parse_machine,
    render_machine,
    render_text,
)
from src.pipeline.stages import derive_seed  # noqa: E402
from src.pipeline.sweep import seed_list, summarize  # noqa: E402


def tiny_config_dict(**overrides) -> dict:
    training = {"initial_lr": 1.0, "lr_decay": 0.5, "lr_floor": 0.01, "batch_size": 8, "dropout": 0.1, "max_epochs": 2}
    data = {
        "seed": 3,
        "data": {
            "grammar": str(project_root / "config" / "grammar_default.yaml"),
            "n_examples": 90,
            "noise": 0.05,
            "splits": {"parent_train": 40, "child_train_max": 20, "dev": 10, "test": 12},
        },
        "preorder": {"systems": {"none": None, "G": str(project_root / "rules" / "generic.rules")}},
        "vocab": {"src_min_frequency": 1, "tgt_min_frequency": 1, "tgt_max_size": None},
        "model": {"emb_dim": 4, "hidden_dim": 6, "precision": "float64"},
        "training": {"parent": training, "finetune": training, "baseline": training},
        "ladder": [0, 10],
        "metrics": {"definitions": str(project_root / "config" / "metrics_definitions.yaml"), "n_resamples": 100},
        "decode": {"max_len": 8, "samples": 2},
        "workers": 1,
    }
    data.update(overrides)
    return data


def write_config(directory: Path, **overrides) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "experiment.yaml"
    with open(path, "w") as f:
        yaml.safe_dump(tiny_config_dict(**overrides), f)
    return path


@pytest.fixture(scope="module")
def first_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("experiment")
    config = ExperimentConfig.from_yaml(write_config(root))
    report = run_experiment(config, root / "run")
    return config, root / "run", report


# ============================================================================
# SECTION 1: END-TO-END RUN
# ============================================================================

def test_report_has_every_cell(first_run):
    _, out, report = first_run
    expected = {("none", 0), ("G", 0), ("none", 10), ("G", 10), ("baseline", 10)}
    assert {(c.system, c.child_size) for c in report.cells} == expected
    assert report.cell("baseline", 0) is None
    assert {(s.system, s.child_size) for s in report.significance} == {("G", 0), ("G", 10)}
    assert all(c.n_sentences == 12 for c in report.cells)
    assert (out / "report.txt").exists()
    assert report.provenance["seed"] == 3
    print(render_text(report))


def test_runs_are_byte_identical(first_run, tmp_path):
    config, out, _ = first_run
    run_experiment(config, tmp_path / "again")
    first = (out / "report.jsonl").read_bytes()
    second = (tmp_path / "again" / "report.jsonl").read_bytes()
    assert first == second, "identical configs must give identical machine reports"
    print("✓ Re-run produced a byte-identical report.jsonl")


def test_cells_do_not_depend_on_the_ladder(first_run, tmp_path):
    config, _, report = first_run
    short = run_experiment(config.with_ladder([0]), tmp_path / "short")
    for system in ("none", "G"):
        assert short.cell(system, 0) == report.cell(system, 0)
    assert short.test("G", 0) == report.test("G", 0)


def test_rerun_needs_force_or_resume(first_run):
    config, out, _ = first_run
    with pytest.raises(OutputExists):
        run_experiment(config, out)


def test_resume_skips_unchanged_stages(first_run):
    config, out, report = first_run
    resumed = run_experiment(config, out, resume=True)
    manifest = json.loads((out / "stages.json").read_text())["stages"]
    assert {entry["status"] for entry in manifest.values()} == {"cached"}
    assert resumed == report


def test_lock_blocks_concurrent_runs(tmp_path):
    config = ExperimentConfig.from_yaml(write_config(tmp_path / "cfg"))
    out = tmp_path / "locked"
    out.mkdir()
    (out / ".lock").write_text("12345")
    with pytest.raises(LockHeld):
        run_experiment(config, out)


def test_plan_phases(tmp_path):
    config = ExperimentConfig.from_yaml(write_config(tmp_path / "cfg"))
    phases = ExperimentRunner(config, tmp_path / "plan").plan()
    names = [[s.name for s in phase] for phase in phases]
    assert names[0] == ["data"]
    assert names[2] == ["parent:none", "parent:G"]
    assert "baseline:10" in names[3] and "baseline:0" not in names[3]
    assert names[4] == ["evaluate"]


# ============================================================================
# SECTION 2: REPORT RENDERING
# ============================================================================

def synthetic_report() -> EvalReport:
    cells = [
        Cell("none", 0, 10.0, 20.0, 5, 1, 3),
        Cell("G", 0, 15.0, 25.0, 3, 1, 3),
        Cell("none", 50, 20.0, 30.0, 2, 1, 3),
        Cell("G", 50, 21.0, 31.0, 2, 1, 3),
        Cell("baseline", 50, 4.0, 9.0, 9, 1, 3),
    ]
    tests = [
        SignificanceEntry("G", "none", 0, 0.01, 1000, 7, 990, 10, 0, 15.0, 10.0, "a", True),
        SignificanceEntry("G", "none", 50, 0.4, 1000, 8, 600, 380, 20, 21.0, 20.0, "a", False),
    ]
    return EvalReport(cells=cells, significance=tests, provenance={"seed": 1, "version": "1.0.0"})


def test_text_report_marks_significance_and_missing_baseline():
    text = render_text(synthetic_report())
    bleu_table = text.split("\n\n")[0].splitlines()
    assert "No-Transfer" in bleu_table[1] and "No-Preorder" in bleu_table[1]
    size_0 = next(line for line in bleu_table if line.strip().startswith("0 "))
    size_50 = next(line for line in bleu_table if line.strip().startswith("50 "))
    assert NOT_AVAILABLE in size_0
    assert f"15.00{DAGGER}" in size_0
    assert DAGGER not in size_50


def test_empty_report_renders_headers_only():
    text = render_text(EvalReport())
    assert text.splitlines()[:2] == ["BLEU", "    Size"]
    assert DAGGER not in text


def test_machine_format_round_trip():
    report = synthetic_report()
    text = render_machine(report)
    assert parse_machine(text) == report
    assert all(json.loads(line)["record"] for line in text.splitlines())


# ============================================================================
# SECTION 3: CONFIGURATION
# ============================================================================

@pytest.mark.parametrize(
    "overrides,field_name",
    [
        ({"ladder": [10, 20]}, "ladder"),
        ({"ladder": [0, 10, 5]}, "ladder"),
        ({"ladder": [0, 50]}, "ladder"),
        ({"preorder": {"systems": {"G": str(project_root / "rules" / "generic.rules")}}}, "preorder.systems"),
        ({"preorder": {"systems": {"none": None, "X": "missing.rules"}}}, "preorder.systems.X"),
        ({"model": {"cell": "lstm"}}, "model"),
        ({"model": {"colour": "blue"}}, "config"),
        ({"workers": 0}, "workers"),
    ],
)
def test_config_errors_name_the_field(tmp_path, overrides, field_name):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_yaml(write_config(tmp_path, **overrides))
    assert info.value.field == field_name


def test_config_paths_resolve_relative_to_file(tmp_path):
    path = write_config(tmp_path, preorder={"systems": {"none": None, "G": "rules/g.rules"}})
    (tmp_path / "rules").mkdir()
    (tmp_path / "rules" / "g.rules").write_text((project_root / "rules" / "generic.rules").read_text())
    config = ExperimentConfig.from_yaml(path)
    assert config.rules_path("G") == (tmp_path / "rules" / "g.rules").resolve()


def test_config_hash_tracks_settings(tmp_path):
    config = ExperimentConfig.from_yaml(write_config(tmp_path))
    assert config.config_hash() == config.with_seed(3).config_hash()
    assert config.config_hash() != config.with_seed(4).config_hash()


def test_derive_seed():
    assert derive_seed(1, "parent", "G") == derive_seed(1, "parent", "G")
    assert derive_seed(1, "parent", "G") != derive_seed(1, "parent", "HT")
    assert 0 <= derive_seed(99, "x") < 2 ** 31


# ============================================================================
# SECTION 4: SEED SWEEP
# ============================================================================

def sweep_reports():
    def report(seed, rows, unk, p):
        cells = [Cell(s, k, b, b, unk.get((s, k), 0), seed, 3) for (s, k), b in rows.items()]
        test = SignificanceEntry("G", "none", 0, p, 1000, seed, 0, 0, 0, rows[("G", 0)], rows[("none", 0)], "a", p < 0.05)
        return EvalReport(cells=cells, significance=[test])

    return {
        1: report(
            1,
            {("none", 0): 10, ("G", 0): 15, ("none", 10): 20, ("G", 10): 21, ("baseline", 10): 5},
            {("none", 0): 5, ("G", 0): 3},
            0.01,
        ),
        2: report(
            2,
            {("none", 0): 12, ("G", 0): 14, ("none", 10): 22, ("G", 10): 20, ("baseline", 10): 25},
            {("none", 0): 4, ("G", 0): 6},
            0.2,
        ),
    }


def test_sweep_summary():
    summary = summarize(sweep_reports(), alpha=0.05)
    assert summary["seeds"] == [1, 2]
    assert summary["largest_size"] == 10
    assert summary["systems"]["none"] == {"median_bleu_size_0": 11.0}
    g = summary["systems"]["G"]
    assert g["median_bleu_size_0"] == 14.5
    assert g["median_gap_size_0"] == 3.5
    assert g["significant_size_0"] == 1
    assert g["fewer_or_equal_unk"] == 1
    assert g["gap_narrows"] == 2
    assert summary["transfer_beats_baseline"] == 1


def test_sweep_ignores_significantly_worse_preordering():
    reports = sweep_reports()
    worse = {("none", 0): 20, ("G", 0): 5, ("none", 10): 22, ("G", 10): 20, ("baseline", 10): 4}
    cells = [Cell(s, k, b, b, 0, 3, 3) for (s, k), b in worse.items()]
    test = SignificanceEntry("G", "none", 0, 0.001, 1000, 3, 999, 1, 0, 5.0, 20.0, "b", True)
    reports[3] = EvalReport(cells=cells, significance=[test])
    summary = summarize(reports, alpha=0.05)
    assert summary["systems"]["G"]["significant_size_0"] == 1, "a significant loss must not count as support"
    assert summarize({3: reports[3]}, alpha=0.05)["systems"]["G"]["significant_size_0"] == 0
    print("✓ Significance counted only when the pre-ordered system wins")


def test_seed_list():
    assert seed_list("1-5") == [1, 2, 3, 4, 5]
    assert seed_list("3,7, 11") == [3, 7, 11]


# ============================================================================
# SECTION 5: COMMAND LINE
# ============================================================================

METRICS = str(project_root / "config" / "metrics_definitions.yaml")


def test_cli_score(tmp_path, capsys):
    hyp = tmp_path / "hyp.txt"
    hyp.write_text("the cat sat\na dog\n", encoding="utf-8")
    assert main_score(["--hyp", str(hyp), "--ref", str(hyp), "--metrics-config", METRICS]) == 0
    out = capsys.readouterr().out
    row = json.loads(out.strip().splitlines()[-1])
    assert row["score"] == 100.0


def test_cli_reports_handled_errors(tmp_path, capsys):
    code = main_score(["--hyp", str(tmp_path / "nope.txt"), "--ref", str(tmp_path / "nope.txt"), "--metrics-config", METRICS])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_cli_validate_grammar(capsys):
    assert main_synth(["validate", "--grammar", str(project_root / "config" / "grammar_default.yaml")]) == 0


def test_cli_experiment_report(first_run, capsys):
    _, out, _ = first_run
    assert main_experiment(["report", "--out", str(out), "--format", "machine"]) == 0
    assert parse_machine(capsys.readouterr().out) == parse_machine((out / "report.jsonl").read_text(encoding="utf-8"))
