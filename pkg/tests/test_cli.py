"""End-to-end CLI: stage tools chained on files, then protocol commands."""
import json

import pytest

from soapseg.cli import main
from soapseg.corpus import read_corpus
from soapseg.vectorize import load_matrix_cache


def run(argv):
    return main(argv)


@pytest.fixture
def workspace(tmp_path):
    notes = tmp_path / "notes.jsonl"
    gold = tmp_path / "gold.jsonl"
    assert run(["generate", "--style", "styleA", "--n", "30", "--seed", "4",
                "--out", str(notes), "--gold-out", str(gold)]) == 0
    return tmp_path, notes, gold


def test_generate_deterministic(tmp_path):
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    run(["generate", "--style", "styleB", "--n", "5", "--seed", "9", "--out", str(a)])
    run(["generate", "--style", "styleB", "--n", "5", "--seed", "9", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_preprocess_dump(workspace):
    tmp_path, notes, _ = workspace
    out = tmp_path / "paragraphs.jsonl"
    assert run(["preprocess", "--in", str(notes), "--out", str(out)]) == 0
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert rows and all({"note_id", "index", "text", "header", "sentences"}
                        <= set(r) for r in rows)


def test_weaklabel_and_report(workspace):
    tmp_path, notes, _ = workspace
    out = tmp_path / "weak.jsonl"
    report = tmp_path / "weak_report.txt"
    assert run(["weaklabel", "--in", str(notes), "--out", str(out),
                "--report", str(report)]) == 0
    labeled = read_corpus(out)
    assert len(labeled) == 30
    assert "30/30 retained" in report.read_text()


def test_vectorize_cache(workspace):
    tmp_path, notes, _ = workspace
    weak = tmp_path / "weak.jsonl"
    run(["weaklabel", "--in", str(notes), "--out", str(weak)])
    cache = tmp_path / "cache.npz"
    assert run(["vectorize", "--in", str(weak), "--provider", "hashed",
                "--dim", "64", "--out", str(cache)]) == 0
    mats = load_matrix_cache(cache)
    assert len(mats) == 30
    assert all(m.dim == 64 for m in mats)


def _experiment_config(tmp_path, **extra):
    config = {
        "train_corpus": {"style": "styleA", "n": 40, "seed": 3},
        "eval_corpora": {"gold_a": {"style": "styleA", "n": 8, "seed": 91}},
        "dim": 64,
        "hyper": {"batch_size": 8, "layers": 1, "hidden": 6, "max_epochs": 3},
        "seeds": [1],
        "train_sizes": [4, "full"],
    }
    config.update(extra)
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(config))
    return path


def test_train_protocol_and_outputs(workspace):
    tmp_path, _, _ = workspace
    config = _experiment_config(tmp_path)
    out_dir = tmp_path / "run"
    model_path = tmp_path / "model.bin"
    assert run(["train", "--config", str(config), "--out-dir", str(out_dir),
                "--save-model", str(model_path)]) == 0
    record = json.loads((out_dir / "record.json").read_text())
    assert record["protocol"] == "weak_train"
    assert model_path.exists()
    assert (out_dir / "training_curves.png").exists()


def test_predict_then_eval(workspace, capsys):
    tmp_path, notes, gold = workspace
    config = _experiment_config(tmp_path)
    model_path = tmp_path / "model.bin"
    run(["train", "--config", str(config), "--out-dir", str(tmp_path / "r"),
         "--save-model", str(model_path)])
    pred = tmp_path / "pred.jsonl"
    assert run(["predict", "--model", str(model_path), "--in", str(notes),
                "--dim", "64", "--out", str(pred)]) == 0
    eval_json = tmp_path / "eval.json"
    assert run(["eval", "--pred", str(pred), "--gold", str(gold),
                "--kappa", "--out-json", str(eval_json)]) == 0
    report = json.loads(eval_json.read_text())
    assert set(report["labels"]) == {"S", "O", "A", "P", "Out"}
    assert 0.0 <= report["macro_f1"] <= 1.0
    assert "Macro" in capsys.readouterr().out


def test_bench_protocol(workspace):
    tmp_path, _, _ = workspace
    config = _experiment_config(tmp_path)
    out_dir = tmp_path / "bench"
    assert run(["bench", "--config", str(config), "--out-dir", str(out_dir)]) == 0
    record = json.loads((out_dir / "record.json").read_text())
    assert record["metrics"]["stages"]["train"] > 0


def test_cli_reports_errors(tmp_path, capsys):
    missing = tmp_path / "missing.jsonl"
    missing.write_text('{"id": "a"}\n')  # no text field
    code = run(["weaklabel", "--in", str(missing), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_transfer_protocol_cli(workspace):
    tmp_path, _, _ = workspace
    config = _experiment_config(
        tmp_path,
        eval_corpora={"target": {"style": "styleB", "n": 25, "seed": 5}},
        train_sizes=[4, "full"])
    out_dir = tmp_path / "xfer"
    assert run(["transfer", "--config", str(config), "--out-dir", str(out_dir)]) == 0
    record = json.loads((out_dir / "record.json").read_text())
    assert record["protocol"] == "transfer_comparison"
    assert len(record["metrics"]["table"]) == 2
    assert (out_dir / "transfer_comparison.png").exists()


def test_ablate_protocol_cli(workspace):
    tmp_path, _, _ = workspace
    config = _experiment_config(tmp_path, train_sizes=[4, 10])
    out_dir = tmp_path / "abl"
    assert run(["ablate", "--config", str(config), "--out-dir", str(out_dir),
                "--seed", "1"]) == 0
    record = json.loads((out_dir / "record.json").read_text())
    assert record["protocol"] == "size_ablation"
    assert record["config"]["seeds"] == [1]
    assert (out_dir / "ablation_trend.png").exists()
