import csv
import json
from pathlib import Path

import numpy as np
import pytest

from lqe.cli import main
from lqe.grading import GRADE_LABELS
from lqe.metrics import accuracy
from lqe.model import load_model_file
from lqe.reports import Report, confusion_from_report
from lqe.trace_io import SessionTrace, parse_trace_csv, write_trace_csv

FAST = ["--preset", "desk", "--window", "10", "--hidden", "6", "--epochs", "3", "--batch", "64"]


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out.strip(), out.err


@pytest.fixture
def synth_csv(tmp_path, capsys):
    path = tmp_path / "trace.csv"
    code, _, _ = run(["synth", "--length", 600, "--seed", 7, "--out", path], capsys)
    assert code == 0
    return path


def write_csv(path, rsrp, sinr=None, sid="s"):
    rsrp = np.asarray(rsrp, dtype=float)
    sinr = np.full_like(rsrp, 5.0) if sinr is None else np.asarray(sinr, dtype=float)
    tr = SessionTrace(sid, np.arange(len(rsrp)), np.column_stack([rsrp, sinr]),
                      np.zeros((len(rsrp), 2), bool))
    write_trace_csv([tr], path)
    return path


def test_synth_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run(["synth", "--length", 5000, "--seed", 7, "--out", p], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    (tr,) = parse_trace_csv(a)
    assert len(tr) == 5000


def test_synth_defaults_follow_reference_marginals(tmp_path, capsys):
    p = tmp_path / "d.csv"
    run(["synth", "--length", 60000, "--autocorr", 0.5, "--out", p], capsys)
    (tr,) = parse_trace_csv(p)
    assert abs(tr.values[:, 0].mean() + 87.17) < 0.5
    assert abs(tr.values[:, 0].std() - 14.94) < 0.5
    assert abs(tr.values[:, 1].mean() - 8.62) < 0.5
    assert abs(tr.values[:, 1].std() - 9.67) < 0.5


def test_synth_zero_length_is_usage_error(capsys):
    with pytest.raises(SystemExit) as err:
        main(["synth", "--length", "0"])
    assert err.value.code == 2


def test_synth_unwritable_path(tmp_path, capsys):
    code, _, err = run(["synth", "--length", 5, "--out", tmp_path / "missing" / "x.csv"], capsys)
    assert code == 1 and "error" in err


def test_synth_seed_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("LQE_SEED", "7")
    run(["synth", "--length", 50, "--out", tmp_path / "env.csv"], capsys)
    run(["synth", "--length", 50, "--seed", 7, "--out", tmp_path / "flag.csv"], capsys)
    assert (tmp_path / "env.csv").read_bytes() == (tmp_path / "flag.csv").read_bytes()


def test_train_outputs_and_determinism(tmp_path, synth_csv, capsys):
    code1, run1, _ = run(["train", synth_csv, *FAST, "--seed", 3, "--out", tmp_path / "runs"], capsys)
    code2, run2, _ = run(["train", synth_csv, *FAST, "--seed", 3, "--out", tmp_path / "runs"], capsys)
    assert code1 == code2 == 0 and run1 != run2
    r1, r2 = Path(run1), Path(run2)
    assert (r1 / "model.lqem").read_bytes() == (r2 / "model.lqem").read_bytes()
    assert (r1 / "report.txt").read_text() == (r2 / "report.txt").read_text()
    rep = Report.from_text((r1 / "report.txt").read_text())
    cfg = rep.sections["effective-config"]
    assert cfg["window"] == 10 and cfg["hidden"] == 6 and cfg["tau"] == 120.0
    assert cfg["learning_rate"] == 0.001 and cfg["dropout_rate"] == 0.266 and cfg["split"] == [7, 2, 1]
    header, rows = rep.table("history")
    assert header == ["epoch", "train_loss", "val_loss"] and len(rows) == rep.sections["summary"]["epochs_run"]
    vals = [float(r[2]) for r in rows]
    assert rep.sections["summary"]["best_epoch"] == int(np.argmin(vals)) + 1


def test_effective_config_reproduces_run(tmp_path, synth_csv, capsys):
    _, first, _ = run(["train", synth_csv, *FAST, "--seed", 9, "--out", tmp_path], capsys)
    cfg = Path(first) / "effective-config.json"
    _, again, _ = run(["train", "--config", cfg, "--out", tmp_path], capsys)
    assert (Path(first) / "model.lqem").read_bytes() == (Path(again) / "model.lqem").read_bytes()
    assert json.loads(cfg.read_text()) == json.loads((Path(again) / "effective-config.json").read_text())


def test_paper_preset_defaults():
    from lqe.config import RunConfig
    cfg = RunConfig.from_preset("paper")
    assert (cfg.tau, cfg.window, cfg.hidden, cfg.layers) == (120.0, 370, 128, 2)
    assert (cfg.learning_rate, cfg.batch_size, cfg.max_epochs, cfg.dropout_rate) == (1e-3, 128, 1000, 0.266)
    assert (cfg.patience, cfg.min_delta, cfg.split) == (50, -1e-4, (7, 2, 1))


def test_train_trace_too_short_names_window(tmp_path, capsys):
    p = write_csv(tmp_path / "short.csv", np.linspace(-90, -100, 30))
    code, _, err = run(["train", p, "--preset", "desk", "--out", tmp_path], capsys)
    assert code == 1 and "N=30" in err


def test_train_invalid_override_is_error(tmp_path, synth_csv, capsys):
    code, _, err = run(["train", synth_csv, *FAST, "--dropout", 1.5, "--out", tmp_path], capsys)
    assert code == 1 and "dropout" in err


@pytest.fixture(scope="module")
def overfit_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("overfit")
    t = np.arange(240)
    path = write_csv(root / "wave.csv", -97 + 16 * np.sin(2 * np.pi * t / 60), 8 + 2 * np.cos(2 * np.pi * t / 60))
    argv = ["train", path, "--preset", "desk", "--window", 12, "--hidden", 16, "--epochs", 300,
            "--batch", 16, "--dropout", 0, "--lr", 0.01, "--patience", 300, "--seed", 1, "--out", root]
    assert main([str(a) for a in argv]) == 0
    run_dir = max(root.glob("train-*"))
    return path, run_dir / "model.lqem", root


def test_evaluate_overfit_model(overfit_run, capsys):
    trace, model, root = overfit_run
    code, out, _ = run(["evaluate", trace, "--model", model, "--out", root], capsys)
    assert code == 0
    rep = Report.from_text((Path(out) / "report.txt").read_text())
    summary = rep.sections["summary"]
    assert summary["accuracy"] >= 0.9
    cm = confusion_from_report(rep)
    assert summary["accuracy"] == accuracy(cm)
    assert summary["n_samples"] == cm.sum() == 240 - 12
    assert 0 <= summary["persistence_accuracy"] <= 1
    header, rows = rep.table("per_class")
    f1 = [float(r[2]) for r in rows if int(r[1]) > 0]
    assert summary["macro_f1"] == pytest.approx(np.mean(f1), abs=1e-15)


def test_predict_rows(overfit_run, capsys):
    trace, model, root = overfit_run
    code, out, _ = run(["predict", trace, "--model", model, "--horizon", 1, "--out", root], capsys)
    assert code == 0
    with open(Path(out) / "predictions.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 240 - 12
    assert {r["predicted_grade"] for r in rows} <= set(GRADE_LABELS)
    assert rows[0]["timestamp_s"] == "12"
    assert float(rows[0]["predicted_rsrp_dbm"]) == pytest.approx(
        float(rows[0]["predicted_trend_dbm"]) + float(rows[0]["predicted_noise_dbm"]))


def test_predict_marks_missing_actuals(overfit_run, tmp_path, capsys):
    trace, model, _ = overfit_run
    text = Path(trace).read_text().splitlines()
    # blank the RSRP of timestamp 20 (line index 21 counting the header)
    cells = text[21].split(",")
    cells[2] = ""
    text[21] = ",".join(cells)
    p = tmp_path / "holey.csv"
    p.write_text("\n".join(text) + "\n")
    code, out, _ = run(["predict", p, "--model", model, "--out", tmp_path], capsys)
    with open(Path(out) / "predictions.csv", newline="") as fh:
        rows = {r["timestamp_s"]: r for r in csv.DictReader(fh)}
    assert rows["20"]["actual_rsrp_dbm"] == "" and rows["20"]["actual_grade"] == ""
    assert rows["21"]["actual_rsrp_dbm"] != ""


def test_predict_horizon_other_than_one_rejected(overfit_run, capsys):
    trace, model, root = overfit_run
    code, _, err = run(["predict", trace, "--model", model, "--horizon", 2, "--out", root], capsys)
    assert code == 1 and "horizon" in err


def test_evaluate_missing_model_file(tmp_path, synth_csv, capsys):
    code, _, err = run(["evaluate", synth_csv, "--model", tmp_path / "nope.lqem", "--out", tmp_path], capsys)
    assert code == 1 and "nope.lqem" in err


def test_evaluate_rejects_corrupt_model(tmp_path, synth_csv, capsys):
    bad = tmp_path / "bad.lqem"
    bad.write_bytes(b"JUNKJUNKJUNK")
    code, _, err = run(["evaluate", synth_csv, "--model", bad, "--out", tmp_path], capsys)
    assert code == 1 and "magic" in err


def test_constant_trace_prediction_converges(tmp_path, capsys):
    path = write_csv(tmp_path / "flat.csv", np.full(200, -101.5), np.full(200, 4.0))
    argv = ["train", path, "--preset", "desk", "--window", 8, "--hidden", 8, "--epochs", 150,
            "--batch", 32, "--dropout", 0, "--lr", 0.01, "--seed", 2, "--out", tmp_path]
    code, run_dir, _ = run(argv, capsys)
    assert code == 0
    code, out, _ = run(["predict", path, "--model", Path(run_dir) / "model.lqem", "--out", tmp_path], capsys)
    with open(Path(out) / "predictions.csv", newline="") as fh:
        preds = np.array([float(r["predicted_rsrp_dbm"]) for r in csv.DictReader(fh)])
    assert len(preds) == 192
    assert np.all(np.abs(preds + 101.5) <= 1.0)


@pytest.mark.slow
def test_desk_smoke_run(tmp_path, capsys):
    p = tmp_path / "t.csv"
    run(["synth", "--length", 5000, "--seed", 1, "--out", p], capsys)
    code, out, _ = run(["train", p, "--preset", "desk", "--epochs", 50, "--seed", 1, "--out", tmp_path], capsys)
    assert code == 0
    run_dir = Path(out)
    assert (run_dir / "model.lqem").exists()
    model = load_model_file(run_dir / "model.lqem")
    assert (model.config.window, model.config.hidden) == (30, 16)
    rep = Report.from_text((run_dir / "report.txt").read_text())
    vals = [float(r[2]) for r in rep.table("history")[1]]
    assert min(vals) < vals[0]
