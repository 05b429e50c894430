from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from wowbehavior.cli import main
from wowbehavior.pipeline import PipelineConfig, StageError, load_config, run_pipeline


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def run(log, out, **kw):
    cfg = PipelineConfig(log_path=log, out_dir=out, interval_minutes=240, rng_seed=42, **kw)
    return run_pipeline(cfg)


def test_runs_are_byte_identical(two_year_log, tmp_path):
    log, _ = two_year_log
    run(log, tmp_path / "a")
    run(log, tmp_path / "b")
    a, b = tree_bytes(tmp_path / "a"), tree_bytes(tmp_path / "b")
    assert a == b and "manifest.json" in a


def test_per_year_gives_three_report_sets(two_year_log, tmp_path):
    log, _ = two_year_log
    run(log, tmp_path / "out", per_year=True)
    out = tmp_path / "out"
    assert sorted(p.name for p in out.iterdir() if p.is_dir()) == ["2007", "2008", "all"]
    header = (out / "table1.txt").read_text(encoding="utf-8").splitlines()[0]
    assert [c.strip() for c in header.split("|")][1:] == ["2007", "2008", "2007-2008"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["windows"]) == {"2007", "2008", "all"}


def test_killers_are_the_modal_behavior(two_year_log, tmp_path):
    log, truth = two_year_log
    run(log, tmp_path / "out")
    with open(tmp_path / "out" / "all" / "distribution_behavior.csv") as fh:
        counts = {r["behavior"]: int(r["players"]) for r in csv.DictReader(fh)}
    assert max(counts, key=counts.get) == "Killer"
    assert sum(counts.values()) == len(truth)
    assert counts["GM"] == sum(1 for a in truth.archetypes.values() if a == "GM")


def test_rerun_replaces_previous_output(two_year_log, tmp_path):
    log, _ = two_year_log
    run(log, tmp_path / "out", year=2008)
    run(log, tmp_path / "out", year=2007)
    assert sorted(p.name for p in (tmp_path / "out").iterdir() if p.is_dir()) == ["2007"]


def test_stage_errors(tmp_path):
    with pytest.raises(StageError, match=r"^\[config\]"):
        run(tmp_path / "missing.csv", tmp_path / "out")
    junk = tmp_path / "junk.csv"
    junk.write_text("not,a,log\n")
    with pytest.raises(StageError, match=r"^\[ingest\]"):
        run(junk, tmp_path / "out")
    bland = tmp_path / "bland.csv"
    bland.write_text("".join(f"2006-01-01 00:{m:02d},P{m},,40,Orc,Mage,Durotar\n" for m in range(0, 60, 10)))
    with pytest.raises(StageError, match=r"^\[label\]"):
        run(bland, tmp_path / "out")
    assert not (tmp_path / "out").exists() and not (tmp_path / "out.partial").exists()


def test_refuses_foreign_directory(two_year_log, tmp_path):
    (tmp_path / "out").mkdir()
    (tmp_path / "out" / "precious.txt").write_text("keep")
    with pytest.raises(StageError, match="not a previous run"):
        run(two_year_log[0], tmp_path / "out")
    assert (tmp_path / "out" / "precious.txt").exists()


def test_config_file(tmp_path, two_year_log):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(f"log = {two_year_log[0]}\nout = results\ninterval = 240\nseed = 7\n"
                        "folds = 4\nmin_gain = 0.2\nconfidence_threshold = 0.9\n")
    cfg = load_config(cfg_path)
    assert cfg.out_dir == tmp_path / "results" and cfg.folds == 4 and cfg.rng_seed == 7
    assert cfg.tree_params.min_gain == 0.2 and cfg.self_train_params.confidence_threshold == 0.9


def test_cli_end_to_end(tmp_path, capsys):
    syn = tmp_path / "syn"
    assert main(["synth", "--players", "150", "--interval", "240", "--seed", "3",
                 "--out", str(syn)]) == 0
    assert (syn / "sessions.csv").exists() and (syn / "ground_truth.csv").exists()
    assert main(["run", "--log", str(syn / "sessions.csv"), "--interval", "240",
                 "--out", str(tmp_path / "run")]) == 0
    table = capsys.readouterr().out
    assert table.splitlines()[-1].startswith("Accuracy")

    prof = tmp_path / "profiles.csv"
    labels = tmp_path / "labels.csv"
    assert main(["featurize", str(syn / "sessions.csv"), "--interval", "240",
                 "--out", str(prof)]) == 0
    assert main(["label", str(prof), "--out", str(labels)]) == 0
    assert main(["train", str(prof), str(labels), "--out", str(tmp_path / "model")]) == 0
    assert (tmp_path / "model" / "tree.json").exists()
    assert main(["evaluate", str(prof), str(tmp_path / "model" / "labels.csv")]) == 0
    assert main(["compare-attrs", str(prof), str(tmp_path / "model" / "labels.csv")]) == 0
    assert main(["ingest", str(syn / "sessions.csv"), "--year", "2007"]) == 0
    assert main(["zones", "validate"]) == 0
    out = capsys.readouterr().out
    assert "nodes=" in out and '"rows_accepted"' in out and "entries: 161" in out


def test_cli_reports_failures(tmp_path, capsys):
    assert main(["run", "--log", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")]) == 2
    assert "error [config]" in capsys.readouterr().err
