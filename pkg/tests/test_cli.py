"""End-to-end command-line pipeline on a miniature synthetic dataset."""

import json

import numpy as np
import pytest

from modemil.cli import main
from modemil.nn import load_arrays


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth -> preprocess -> train, shared by the downstream command tests."""
    root = tmp_path_factory.mktemp("cli")
    synth_cfg = {
        "modes": ["still", "run"],
        "placements": ["Hips"],
        "n_users": 2,
        "sessions_per_user": 1,
        "minutes_per_session": 160,
        "dwell_mean_minutes": 18.0,
    }
    (root / "synth.json").write_text(json.dumps(synth_cfg))
    assert main(["synth", "--config", str(root / "synth.json"), "--seed", "3", "--out", str(root / "sessions.npz")]) == 0
    assert main(["preprocess", "--sessions", str(root / "sessions.npz"), "--out", str(root / "features.npz")]) == 0

    train_cfg = {"arch": "fusion_mil", "lr": 1e-3, "max_epochs": 2, "patience": 5, "seed": 1, "augment": False}
    (root / "train.json").write_text(json.dumps(train_cfg))
    code = main(
        [
            "train",
            "--features",
            str(root / "features.npz"),
            "--config",
            str(root / "train.json"),
            "--out",
            str(root / "run"),
        ]
    )
    assert code == 0
    return root


def test_synth_writes_sessions_and_manifest(pipeline):
    assert (pipeline / "sessions.npz").exists()
    manifest = json.loads((pipeline / "manifest.json").read_text())
    assert manifest["command"] in ("synth", "preprocess", "train")  # last writer wins in shared dir
    assert "versions" in manifest and "numpy" in manifest["versions"]


def test_train_outputs(pipeline):
    run = pipeline / "run"
    assert (run / "checkpoint.npz").exists()
    history = json.loads((run / "history.json").read_text())
    assert len(history["train_loss"]) == 2
    manifest = json.loads((run / "manifest.json").read_text())
    assert manifest["command"] == "train"
    assert manifest["config"]["seed"] == 1


def test_evaluate_with_and_without_hmm(pipeline, capsys):
    run = pipeline / "run"
    args = ["evaluate", "--features", str(pipeline / "features.npz"), "--model", str(run / "checkpoint.npz")]
    assert main(args + ["--no-hmm"]) == 0
    out_no_hmm = capsys.readouterr().out
    assert "[no-hmm]" in out_no_hmm and "[hmm]" not in out_no_hmm

    assert main(args + ["--hmm", "--out", str(run)]) == 0
    out_hmm = capsys.readouterr().out
    assert "[no-hmm]" in out_hmm and "[hmm]" in out_hmm
    metrics = json.loads((run / "metrics.json").read_text())
    assert "no_hmm" in metrics and "hmm" in metrics
    assert 0.0 <= metrics["hmm"]["accuracy"] <= 1.0
    assert (run / "transitions.txt").exists()
    assert (run / "predictions.npz").exists()


def test_smooth_command(pipeline, capsys):
    run = pipeline / "run"
    out = run / "smoothed.npz"
    code = main(
        [
            "smooth",
            "--predictions",
            str(run / "predictions.npz"),
            "--transitions",
            str(run / "transitions.txt"),
            "--out",
            str(out),
        ]
    )
    assert code == 0
    arrays, _ = load_arrays(out)
    assert "smoothed" in arrays
    assert arrays["smoothed"].shape == arrays["labels"].shape
    assert set(np.unique(arrays["smoothed"])) <= set(range(8))


def test_report_emits_plot_data(pipeline):
    run = pipeline / "run"
    out = run / "report"
    code = main(
        [
            "report",
            "--run",
            str(run),
            "--features",
            str(pipeline / "features.npz"),
            "--model",
            str(run / "checkpoint.npz"),
            "--out",
            str(out),
        ]
    )
    assert code == 0
    confusion = np.loadtxt(out / "confusion.txt")
    assert confusion.shape == (8, 8)
    roc_files = list(out.glob("roc_*.txt"))
    assert roc_files, "per-class ROC point files expected"
    points = np.loadtxt(roc_files[0])
    assert points.shape[1] == 3  # fpr, tpr, threshold
    assert "attention" in (out / "summary.txt").read_text()
    assert (out / "attention.json").exists()


def test_unknown_command_fails():
    assert main(["frobnicate"]) != 0


def test_missing_input_reports_error(tmp_path, capsys):
    code = main(["preprocess", "--sessions", str(tmp_path / "missing.npz"), "--out", str(tmp_path / "x.npz")])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_ingest_requires_root(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("MODEMIL_DATA", raising=False)
    assert main(["ingest", "--out", str(tmp_path / "s.npz")]) == 2


def test_ingest_from_fabricated_tree(tmp_path):
    from test_data import write_shl_tree

    write_shl_tree(tmp_path / "data", users=("User1",), minutes=1)
    code = main(["ingest", "--root", str(tmp_path / "data"), "--out", str(tmp_path / "sessions.npz")])
    assert code == 0
    assert (tmp_path / "sessions.npz").exists()
