"""CLI subcommands: exit codes, artifacts, reproducibility."""
import hashlib
import json

import numpy as np
import pytest

from pulsenet.cli import main


def _sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _gen(out, **overrides):
    args = {
        "--classes": "3",
        "--per-class": "8",
        "--nmin": "48",
        "--nmax": "160",
        "--seed": "3",
        "--out": str(out),
    }
    args.update({k: str(v) for k, v in overrides.items()})
    argv = ["gen"] + [x for kv in args.items() for x in kv]
    assert main(argv) == 0


def test_gen_is_reproducible(tmp_path):
    _gen(tmp_path / "a")
    first = {n: _sha(tmp_path / "a" / n) for n in ("records.bin", "manifest.json", "run.json")}
    _gen(tmp_path / "a")  # same flags, same directory: identical bytes
    for name, digest in first.items():
        assert _sha(tmp_path / "a" / name) == digest
    _gen(tmp_path / "b")
    assert _sha(tmp_path / "b/records.bin") == first["records.bin"]
    assert _sha(tmp_path / "b/manifest.json") == first["manifest.json"]


def test_gen_missing_out_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["gen", "--classes", "3"])
    assert exc.value.code == 2


def test_gen_snr_defaults(tmp_path):
    _gen(tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["snr_range_db"] == [-12.0, 12.0]
    assert manifest["K"] == 3
    run = json.loads((tmp_path / "run.json").read_text())
    assert run["run_config"]["seed"] == 3
    assert "toolkit_version" in run


def test_gen_invalid_manifest_exit_2(tmp_path, capsys):
    assert main(["gen", "--classes", "1", "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    _gen(data)
    out = root / "run"
    argv = [
        "train", "--data", str(data), "--out", str(out),
        "--depth", "22", "--width", "4", "--kernel", "7", "--input-len", "96",
        "--batch-size", "8", "--epochs", "2", "--patience", "1",
        "--eval-repeats", "2", "--seed", "1", "--quiet",
    ]
    assert main(argv) == 0
    return data, out


def test_train_artifacts(trained):
    data, out = trained
    for name in ("best.ckpt", "history.json", "report.json", "scatter.csv", "run.json"):
        assert (out / name).exists()
    history = json.loads((out / "history.json").read_text())
    assert "wall_time_s" not in history  # kept in run.json so bytes reproduce
    assert len(history["train_loss"]) == history["stop_epoch"]
    run = json.loads((out / "run.json").read_text())
    assert run["run_config"]["model"]["depth"] == 22
    assert run["run_config"]["train"]["seed"] == 1
    assert run["run_config"]["parameters"] > 0
    report = json.loads((out / "report.json").read_text())
    assert report["kind"] == "ce" and report["k"] == 3


def test_eval_subcommand(trained, tmp_path, capsys):
    data, out = trained
    report = tmp_path / "rep.json"
    scatter = tmp_path / "sc.csv"
    argv = [
        "eval", "--ckpt", str(out / "best.ckpt"), "--data", str(data),
        "--repeats", "2", "--seed", "5", "--report", str(report),
        "--scatter", str(scatter),
    ]
    assert main(argv) == 0
    payload = json.loads(report.read_text())
    assert payload["run_config"]["repeats"] == 2
    assert scatter.read_text().startswith("pulse_width,snr_db,L,correct")
    # same flags, same bytes
    assert main(argv) == 0
    assert json.loads(report.read_text()) == payload


def test_eval_missing_checkpoint_exit_1(trained, tmp_path, capsys):
    data, _ = trained
    code = main([
        "eval", "--ckpt", str(tmp_path / "missing.ckpt"), "--data", str(data),
        "--report", str(tmp_path / "r.json"),
    ])
    assert code == 1
    assert "not found" in capsys.readouterr().err


def test_train_rejects_bad_config_file(trained, tmp_path):
    data, _ = trained
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code = main(["train", "--data", str(data), "--out", str(tmp_path / "x"),
                 "--config", str(bad)])
    assert code == 2


def test_config_file_flag_precedence(trained, tmp_path):
    data, _ = trained
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "model": {"arithmetic": "real-1ch", "depth": 22, "base_width": 4,
                   "first_kernel": 7, "input_length": 96, "num_classes": 3},
        "train": {"batch_size": 8, "max_epochs": 2, "patience": 1, "seed": 0},
        "eval_repeats": 1,
    }))
    out = tmp_path / "run2"
    # flag overrides the file's arithmetic
    assert main(["train", "--data", str(data), "--out", str(out),
                 "--config", str(cfg), "--arithmetic", "iq-2ch", "--quiet"]) == 0
    run = json.loads((out / "run.json").read_text())
    assert run["run_config"]["model"]["arithmetic"] == "iq-2ch"
    assert run["run_config"]["train"]["max_epochs"] == 2


def test_summary_subcommand(tmp_path, capsys):
    cfg = tmp_path / "model.json"
    cfg.write_text(json.dumps({
        "arithmetic": "complex", "depth": 30, "base_width": 8,
        "first_kernel": 9, "input_length": 1024, "num_classes": 17,
    }))
    assert main(["summary", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "206529" in out
    assert "receptive field" in out


def test_summary_invalid_config_exit_2(tmp_path, capsys):
    cfg = tmp_path / "model.json"
    cfg.write_text(json.dumps({"arithmetic": "quaternion"}))
    assert main(["summary", "--config", str(cfg)]) == 2


def test_gradcheck_gate():
    assert main(["gradcheck", "--precision", "double", "--trials", "2"]) == 0
    assert main(["gradcheck", "--precision", "single", "--trials", "2"]) == 0


def test_sweep_d_smoke(tmp_path):
    data = tmp_path / "data"
    _gen(data, **{"--per-class": "6"})
    out = tmp_path / "sweep"
    argv = [
        "sweep-d", "--data", str(data), "--d-values", "64,96", "--out", str(out),
        "--depth", "22", "--width", "4", "--kernel", "7",
        "--batch-size", "8", "--epochs", "1", "--patience", "1".replace("1", "1"),
        "--eval-repeats", "1",
    ]
    # patience must be < max_epochs
    argv[argv.index("--epochs") + 1] = "2"
    assert main(argv) == 0
    lines = (out / "sweep.csv").read_text().strip().splitlines()
    assert lines[0].startswith("input_length,test_error")
    assert len(lines) == 3
    meta = json.loads((out / "sweep.meta.json").read_text())
    assert meta["run_config"]["d_values"] == [64, 96]


def test_multipulse_smoke(tmp_path):
    out = tmp_path / "mp"
    argv = [
        "multipulse", "--classes", "3", "--input-len", "96", "--nmin", "48",
        "--nmax", "96", "--l-values", "1,2", "--scenes-per-epoch", "16",
        "--batch-size", "8", "--epochs", "2", "--patience", "1",
        "--eval-scenes", "8", "--eval-repeats", "1",
        "--depth", "22", "--width", "4", "--kernel", "7",
        "--out", str(out), "--quiet",
    ]
    assert main(argv) == 0
    lines = (out / "multipulse.csv").read_text().strip().splitlines()
    assert lines[0] == "L,e_abs,e_sub,k_eabs"
    assert len(lines) == 3
    assert (out / "report_l1.json").exists()
    assert (out / "best.ckpt").exists()
