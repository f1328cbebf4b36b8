import csv
import json

import numpy as np
import pytest
from PIL import Image

from cxrnet.cli import (ENV_DATA_ROOT, EXIT_CONFIG, EXIT_DECODE, EXIT_FORMAT,
                        EXIT_LAYOUT, EXIT_OK, main)

from conftest import write_dataset_tree
from helpers import trapezoid_scalar


@pytest.fixture(scope="module")
def tiny_tree(tmp_path_factory):
    """Smallest usable tree; CLI always trains the full 128x128 model."""
    return write_dataset_tree(tmp_path_factory.mktemp("data"),
                              {"train": (2, 2), "val": (1, 1), "test": (2, 2)},
                              size=32, seed=7)


def run_train(tree, out, extra=()):
    return main(["train", "--data", str(tree), "--out", str(out),
                 "--epochs", "1", "--seed", "0", *extra])


class TestTrainCommand:
    def test_writes_artifacts(self, tiny_tree, tmp_path, capsys):
        out = tmp_path / "run"
        assert run_train(tiny_tree, out) == EXIT_OK
        history = (out / "history.csv").read_text().splitlines()
        assert history[0] == "epoch,train_loss,train_acc,val_loss,val_acc,lr"
        assert len(history) == 2
        assert (out / "last.ckpt").is_file()
        assert (out / "best.ckpt").is_file()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 0
        assert "config_sha256" in manifest
        assert "epoch 1/1" in capsys.readouterr().out

    def test_epochs_rows_match_config(self, tiny_tree, tmp_path):
        out = tmp_path / "run2"
        assert main(["train", "--data", str(tiny_tree), "--out", str(out),
                     "--epochs", "2", "--seed", "1"]) == EXIT_OK
        assert len((out / "history.csv").read_text().splitlines()) == 3

    def test_seed_reproducibility_byte_identical(self, tiny_tree, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_train(tiny_tree, out1, ["--seed", "7"]) == EXIT_OK
        assert run_train(tiny_tree, out2, ["--seed", "7"]) == EXIT_OK
        assert (out1 / "history.csv").read_bytes() == (out2 / "history.csv").read_bytes()
        # manifests differ only in out_dir, which is part of the config
        m1 = json.loads((out1 / "manifest.json").read_text())
        m2 = json.loads((out2 / "manifest.json").read_text())
        del m1["config"]["out_dir"], m2["config"]["out_dir"]
        del m1["config_sha256"], m2["config_sha256"]
        assert m1 == m2

    def test_missing_dataset_root_no_partial_artifacts(self, tmp_path, capsys):
        out = tmp_path / "never"
        code = main(["train", "--data", str(tmp_path / "missing"), "--out", str(out),
                     "--epochs", "1"])
        assert code == EXIT_LAYOUT
        assert not out.exists()
        assert "category=layout" in capsys.readouterr().err

    def test_no_data_root_at_all(self, tmp_path, monkeypatch, capsys):
        monkeypatch.delenv(ENV_DATA_ROOT, raising=False)
        code = main(["train", "--out", str(tmp_path / "x"), "--epochs", "1"])
        assert code == EXIT_CONFIG
        assert "category=config" in capsys.readouterr().err

    def test_env_var_dataset_root(self, tiny_tree, tmp_path, monkeypatch):
        monkeypatch.setenv(ENV_DATA_ROOT, str(tiny_tree))
        out = tmp_path / "envrun"
        assert main(["train", "--out", str(out), "--epochs", "1",
                     "--seed", "0"]) == EXIT_OK
        assert (out / "history.csv").is_file()

    def test_config_file_and_flag_precedence(self, tiny_tree, tmp_path):
        cfg = {"data_root": str(tiny_tree), "out_dir": str(tmp_path / "cfg_out"),
               "epochs": 3, "seed": 4, "augment": None,
               "plateau": {"factor": 0.1, "patience": 3, "min_lr": 1e-5}}
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(cfg))
        # --epochs overrides the file's 3
        assert main(["train", "--config", str(cfg_path), "--epochs", "1"]) == EXIT_OK
        rows = (tmp_path / "cfg_out" / "history.csv").read_text().splitlines()
        assert len(rows) == 2

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"data_root": "x", "momentum": 0.9}))
        assert main(["train", "--config", str(bad)]) == EXIT_CONFIG
        assert "momentum" in capsys.readouterr().err

    def test_malformed_json_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["train", "--config", str(bad)]) == EXIT_CONFIG


@pytest.fixture(scope="module")
def trained_run(tiny_tree, tmp_path_factory):
    out = tmp_path_factory.mktemp("trained")
    assert run_train(tiny_tree, out) == EXIT_OK
    return tiny_tree, out


class TestEvaluateCommand:
    def test_report_files(self, trained_run, tmp_path, capsys):
        tree, run_dir = trained_run
        out = tmp_path / "eval"
        code = main(["evaluate", "--checkpoint", str(run_dir / "last.ckpt"),
                     "--data", str(tree), "--split", "test", "--out", str(out)])
        assert code == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["total"] == 4
        cm = report["confusion"]
        assert cm["tn"] + cm["fp"] + cm["fn"] + cm["tp"] == 4
        assert report["accuracy"] == (cm["tn"] + cm["tp"]) / 4
        printed = capsys.readouterr().out
        assert "accuracy=" in printed and "roc_auc=" in printed
        assert (out / "scores.csv").is_file()
        assert (out / "roc.csv").is_file() and (out / "pr.csv").is_file()

    def test_roc_csv_reintegrates_to_report_auc(self, trained_run, tmp_path):
        tree, run_dir = trained_run
        out = tmp_path / "eval2"
        main(["evaluate", "--checkpoint", str(run_dir / "last.ckpt"),
              "--data", str(tree), "--out", str(out)])
        report = json.loads((out / "report.json").read_text())
        with open(out / "roc.csv") as f:
            rows = list(csv.DictReader(f))
        fpr = [float(r["fpr"]) for r in rows]
        tpr = [float(r["tpr"]) for r in rows]
        assert abs(trapezoid_scalar(tpr, fpr) - report["roc_auc"]) < 1e-9

    def test_corrupt_checkpoint_exit_code(self, trained_run, tmp_path, capsys):
        tree, run_dir = trained_run
        ckpt = run_dir / "last.ckpt"
        blob = bytearray(ckpt.read_bytes())
        blob[len(blob) // 2] ^= 0x01
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(bytes(blob))
        code = main(["evaluate", "--checkpoint", str(bad), "--data", str(tree),
                     "--out", str(tmp_path / "e3")])
        assert code == EXIT_FORMAT
        assert "category=format" in capsys.readouterr().err


class TestPredictCommand:
    def test_deterministic_probability(self, trained_run, capsys):
        tree, run_dir = trained_run
        image = next((tree / "test" / "NORMAL").iterdir())
        args = ["predict", "--checkpoint", str(run_dir / "last.ckpt"),
                "--image", str(image)]
        assert main(args) == EXIT_OK
        first = capsys.readouterr().out.strip()
        assert main(args) == EXIT_OK
        assert capsys.readouterr().out.strip() == first

    def test_probability_label_consistency(self, trained_run, capsys):
        tree, run_dir = trained_run
        image = next((tree / "test" / "PNEUMONIA").iterdir())
        main(["predict", "--checkpoint", str(run_dir / "last.ckpt"),
              "--image", str(image)])
        prob_str, label = capsys.readouterr().out.split()
        prob = float(prob_str)
        assert 0.0 < prob < 1.0
        assert label == ("PNEUMONIA" if prob >= 0.5 else "NORMAL")

    def test_degenerate_images(self, trained_run, tmp_path, capsys):
        _, run_dir = trained_run
        for name, value in (("black.png", 0), ("white.png", 255)):
            p = tmp_path / name
            Image.fromarray(np.full((64, 64), value, dtype=np.uint8), mode="L").save(p)
            assert main(["predict", "--checkpoint", str(run_dir / "last.ckpt"),
                         "--image", str(p)]) == EXIT_OK
            prob = float(capsys.readouterr().out.split()[0])
            assert np.isfinite(prob)

    def test_undecodable_image(self, trained_run, tmp_path, capsys):
        _, run_dir = trained_run
        junk = tmp_path / "junk.jpg"
        junk.write_bytes(b"not an image")
        code = main(["predict", "--checkpoint", str(run_dir / "last.ckpt"),
                     "--image", str(junk)])
        assert code == EXIT_DECODE
        assert "category=decode" in capsys.readouterr().err


class TestReportCommand:
    def test_rederive_from_scores(self, trained_run, tmp_path):
        tree, run_dir = trained_run
        eval_out = tmp_path / "eval"
        main(["evaluate", "--checkpoint", str(run_dir / "last.ckpt"),
              "--data", str(tree), "--out", str(eval_out)])
        rep_out = tmp_path / "rederived"
        assert main(["report", "--scores", str(eval_out / "scores.csv"),
                     "--out", str(rep_out)]) == EXIT_OK
        original = json.loads((eval_out / "report.json").read_text())
        rederived = json.loads((rep_out / "report.json").read_text())
        assert rederived == original

    def test_missing_scores_file(self, tmp_path, capsys):
        code = main(["report", "--scores", str(tmp_path / "none.csv")])
        assert code == 1
        assert "category=input" in capsys.readouterr().err
