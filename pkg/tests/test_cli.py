import json
import subprocess
import sys

import pytest

from vugrade.cli import main


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def cli_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli-corpus")
    code = run_cli(
        "synth", "--out", out, "--n-vus", 120, "--n-patients", 12, "--seed", 5,
    )
    assert code == 0
    return out


def test_synth_writes_expected_files(tmp_path, capsys):
    code = run_cli("synth", "--out", tmp_path / "c", "--n-vus", 10, "--n-patients", 3,
                   "--seed", 1, "--image-size", "64x64")
    assert code == 0
    assert (tmp_path / "c" / "manifest.csv").exists()
    assert (tmp_path / "c" / "provenance.json").exists()
    assert len(list((tmp_path / "c" / "images").glob("*.png"))) == 10
    assert "10 VUs" in capsys.readouterr().out


def test_split_deterministic(cli_corpus, tmp_path):
    manifest = cli_corpus / "manifest.csv"
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli("split", "--manifest", manifest, "--out", a, "--k", 3, "--seed", 4) == 0
    assert run_cli("split", "--manifest", manifest, "--out", b, "--k", 3, "--seed", 4) == 0
    assert a.read_bytes() == b.read_bytes()


def test_train_predict_evaluate_chain(cli_corpus, tmp_path, capsys):
    manifest = cli_corpus / "manifest.csv"
    run_dir = tmp_path / "run"
    assert run_cli("train", "--manifest", manifest, "--out", run_dir, "--seed", 0) == 0
    assert (run_dir / "model" / "cascade.json").exists()
    assert (run_dir / "model" / "stage1" / "params.npz").exists()
    assert (run_dir / "resolved_config.json").exists()

    preds = tmp_path / "predictions.csv"
    assert run_cli("predict", "--model", run_dir / "model", "--manifest", manifest,
                   "--out", preds) == 0
    assert preds.read_text().startswith("vu_id,site,predicted,p0,p1,p2,p3")

    report_path = tmp_path / "report.json"
    assert run_cli("evaluate", "--manifest", manifest, "--predictions", preds,
                   "--out", report_path) == 0
    report = json.loads(report_path.read_text())
    assert report["balanced_accuracy"] >= 0.9  # held-in evaluation
    out = capsys.readouterr().out
    assert "balanced accuracy" in out


def test_crossval_artifacts_and_rerun_identical(cli_corpus, tmp_path):
    manifest = cli_corpus / "manifest.csv"
    for name in ("runA", "runB"):
        code = run_cli("crossval", "--manifest", manifest, "--out", tmp_path / name,
                       "--k", 2, "--seed", 3)
        assert code == 0
    run_a = tmp_path / "runA"
    for expected in ("resolved_config.json", "assignment.csv", "crossval_table.csv",
                     "crossval_table.txt", "aggregate.json",
                     "fold_0/report.json", "fold_0/predictions.csv",
                     "fold_0/model/cascade.json", "fold_1/report.json"):
        assert (run_a / expected).exists(), expected

    files_a = sorted(p.relative_to(run_a) for p in run_a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "runB")
                     for p in (tmp_path / "runB").rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (run_a / rel).read_bytes() == (tmp_path / "runB" / rel).read_bytes(), rel


def test_crossval_table_structure(cli_corpus, tmp_path):
    manifest = cli_corpus / "manifest.csv"
    out = tmp_path / "run"
    assert run_cli("crossval", "--manifest", manifest, "--out", out, "--k", 2) == 0
    rows = (out / "crossval_table.csv").read_text().splitlines()
    assert rows[0] == "row,precision,recall,f1,auc"
    labels = [line.split(",")[0] for line in rows[1:]]
    assert labels == ["0", "1", "2", "3", "macro", "weighted", "micro",
                      "balanced_accuracy", "accuracy"]


def test_crossval_with_too_many_folds_fails(cli_corpus, tmp_path, capsys):
    manifest = cli_corpus / "manifest.csv"
    out = tmp_path / "run"
    code = run_cli("crossval", "--manifest", manifest, "--out", out, "--k", 50)
    assert code == 2
    record = json.loads((out / "error.json").read_text())
    assert record["error"] == "ConfigurationError"
    assert "patients" in record["message"]
    assert "error:" in capsys.readouterr().err


def test_single_with_unlabeled_test_manifest_fails(cli_corpus, tmp_path):
    manifest = cli_corpus / "manifest.csv"
    lines = manifest.read_text().splitlines()
    stripped = [lines[0]] + [",".join(line.split(",")[:5] + ["", ""]) for line in lines[1:]]
    unlabeled = tmp_path / "unlabeled.csv"
    unlabeled.write_text("\n".join(stripped) + "\n")

    out = tmp_path / "single"
    code = run_cli("single", "--train-manifest", manifest, "--test-manifest", unlabeled,
                   "--test-image-root", cli_corpus, "--out", out)
    assert code == 1
    record = json.loads((out / "error.json").read_text())
    assert record["error"] == "ReportError"


def test_single_run_writes_report(cli_corpus, tmp_path):
    manifest = cli_corpus / "manifest.csv"
    out = tmp_path / "single"
    code = run_cli("single", "--train-manifest", manifest, "--test-manifest", manifest,
                   "--out", out, "--seed", 1)
    assert code == 0
    assert (out / "report.json").exists()
    assert (out / "report.txt").exists()
    assert (out / "model" / "cascade.json").exists()
    assert (out / "predictions.csv").exists()


def test_out_root_env_var(cli_corpus, tmp_path, monkeypatch):
    monkeypatch.setenv("VUGRADE_OUT_ROOT", str(tmp_path / "root"))
    manifest = cli_corpus / "manifest.csv"
    assert run_cli("split", "--manifest", manifest, "--out", "folds.csv", "--k", 2) == 0
    assert (tmp_path / "root" / "folds.csv").exists()


def test_config_file_with_flag_override(cli_corpus, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"schema_version": 1, "k": 2, "seed": 9, "tau": 0.4}))
    out = tmp_path / "run"
    code = run_cli("crossval", "--manifest", cli_corpus / "manifest.csv", "--out", out,
                   "--config", config, "--seed", 11)
    assert code == 0
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["k"] == 2          # from file
    assert resolved["tau"] == 0.4      # from file
    assert resolved["seed"] == 11      # flag wins
    assert resolved["stage1"]["seed"] == 11


def test_unknown_config_key_rejected(cli_corpus, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"schema_version": 1, "folds": 3}))
    code = run_cli("crossval", "--manifest", cli_corpus / "manifest.csv",
                   "--out", tmp_path / "run", "--config", config)
    assert code == 2


def test_module_entry_point(tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "vugrade", "synth", "--out", str(tmp_path / "c"),
         "--n-vus", "4", "--n-patients", "2", "--seed", "0"],
        capture_output=True, text=True,
    )
    assert result.returncode == 0, result.stderr
    assert (tmp_path / "c" / "manifest.csv").exists()
