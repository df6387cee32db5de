import json

import numpy as np
import pytest

import ievm
from ievm import cli, io


def run_cli(*argv):
    return cli.main(list(argv))


@pytest.fixture
def train_csv(tmp_path):
    path = tmp_path / "train.csv"
    io.save_features(ievm.synth_blobs(4, 25, 3, 1.0, 12), path, "csv")
    return path


@pytest.fixture
def model_file(tmp_path, train_csv):
    path = tmp_path / "model.evmm"
    assert run_cli("fit", "--train", str(train_csv), "--out", str(path),
                   "--tail-size", "10") == 0
    return path


class TestSynth:
    def test_writes_loadable_csv(self, tmp_path):
        out = tmp_path / "d.csv"
        code = run_cli("synth", "--classes", "3", "--per-class", "6", "--dim", "2",
                       "--seed", "4", "--out", str(out))
        assert code == 0
        data = io.load_features(out)
        assert len(data) == 18
        assert {s.label for s in data} == {"class_0", "class_1", "class_2"}

    def test_binary_format(self, tmp_path):
        out = tmp_path / "d.bin"
        assert run_cli("synth", "--classes", "2", "--per-class", "4", "--out", str(out),
                       "--format", "binary") == 0
        assert io.sniff_format(out) == "binary"


class TestFit:
    def test_produces_model(self, model_file):
        model = io.load_model(model_file)
        assert model.n_extreme_vectors == 100
        assert model.config.tail_size == 10

    def test_missing_input_fails_cleanly(self, tmp_path, capsys):
        code = run_cli("fit", "--train", str(tmp_path / "nope.csv"),
                       "--out", str(tmp_path / "m.evmm"))
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestPredict:
    def test_stdout_csv(self, model_file, train_csv, capsys):
        assert run_cli("predict", "--model", str(model_file), "--data", str(train_csv)) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "index,true_label,predicted_label,score"
        assert len(lines) == 101
        first = lines[1].split(",")
        assert first[0] == "0"
        # training anchors classify to themselves with full confidence
        assert first[1] == first[2]

    def test_out_file(self, model_file, train_csv, tmp_path):
        out = tmp_path / "preds.csv"
        assert run_cli("predict", "--model", str(model_file), "--data", str(train_csv),
                       "--out", str(out)) == 0
        assert out.read_text().splitlines()[0] == "index,true_label,predicted_label,score"

    def test_threshold_flag_rejects_everything(self, model_file, tmp_path, capsys):
        far = tmp_path / "far.csv"
        io.save_features(
            [ievm.LabeledSample(np.full(3, 1e6), "mystery")], far, "csv"
        )
        assert run_cli("predict", "--model", str(model_file), "--data", str(far),
                       "--threshold", "0.99") == 0
        row = capsys.readouterr().out.splitlines()[1].split(",")
        assert row[2] == "unknown"


class TestReduce:
    def test_wksc_budget(self, model_file, tmp_path):
        out = tmp_path / "small.evmm"
        assert run_cli("reduce", "--model", str(model_file), "--out", str(out),
                       "--mode", "wksc", "--budget", "5") == 0
        reduced = io.load_model(out)
        assert all(len(evs) <= 5 for evs in reduced.classes.values())
        assert reduced.n_extreme_vectors == 20

    def test_set_cover(self, model_file, tmp_path):
        out = tmp_path / "sc.evmm"
        assert run_cli("reduce", "--model", str(model_file), "--out", str(out),
                       "--mode", "set-cover", "--coverage-threshold", "0.5") == 0
        reduced = io.load_model(out)
        assert reduced.n_extreme_vectors <= 100

    def test_set_cover_budget(self, model_file, tmp_path):
        out = tmp_path / "scb.evmm"
        assert run_cli("reduce", "--model", str(model_file), "--out", str(out),
                       "--mode", "set-cover-budget", "--budget", "7") == 0
        reduced = io.load_model(out)
        assert all(len(evs) <= 7 for evs in reduced.classes.values())

    def test_budget_required_for_budgeted_modes(self, model_file, tmp_path, capsys):
        code = run_cli("reduce", "--model", str(model_file),
                       "--out", str(tmp_path / "x.evmm"), "--mode", "wksc")
        assert code == 1
        assert "budget" in capsys.readouterr().err


class TestRun:
    def test_json_report(self, tmp_path):
        config = {
            "method": "ievm",
            "protocol": 2,
            "data": "synth",
            "seed": 3,
            "tail_size": 8,
            "synth_classes": 6,
            "synth_per_class": 15,
            "classes_per_batch": 2,
            "test_samples_per_known": 2,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(config))
        report_path = tmp_path / "report.json"
        assert run_cli("run", "--config", str(cfg_path),
                       "--out-report", str(report_path)) == 0
        doc = json.loads(report_path.read_text())
        assert doc["config"]["method"] == "ievm"
        assert len(doc["epochs"]) == 2
        assert "timings" not in doc

    def test_csv_report_with_timings_flag(self, tmp_path):
        config = {
            "method": "tnn",
            "protocol": 2,
            "data": "synth",
            "seed": 3,
            "synth_classes": 4,
            "synth_per_class": 10,
            "classes_per_batch": 1,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(config))
        report_path = tmp_path / "report.csv"
        assert run_cli("run", "--config", str(cfg_path), "--out-report", str(report_path),
                       "--format", "csv") == 0
        assert report_path.read_text().startswith("epoch,samples_seen")

    def test_bad_config_fails_cleanly(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"method": "ievm"}))
        assert run_cli("run", "--config", str(cfg_path),
                       "--out-report", str(tmp_path / "r.json")) == 1
        assert "error:" in capsys.readouterr().err


class TestConvert:
    def test_round_trip(self, train_csv, tmp_path):
        binary = tmp_path / "d.bin"
        back = tmp_path / "back.csv"
        assert run_cli("convert", "--in", str(train_csv), "--out", str(binary)) == 0
        assert io.sniff_format(binary) == "binary"
        assert run_cli("convert", "--in", str(binary), "--out", str(back)) == 0
        original = io.load_features(train_csv)
        restored = io.load_features(back)
        for a, b in zip(original, restored):
            assert a.label == b.label
            np.testing.assert_array_equal(
                a.features.astype(np.float32).astype(np.float64), b.features
            )

    def test_explicit_format(self, train_csv, tmp_path):
        out = tmp_path / "copy.csv"
        assert run_cli("convert", "--in", str(train_csv), "--out", str(out),
                       "--format", "csv") == 0
        assert io.sniff_format(out) == "csv"


class TestTopLevel:
    def test_no_subcommand_is_error(self, capsys):
        with pytest.raises(SystemExit):
            run_cli()

    def test_unknown_subcommand_is_error(self):
        with pytest.raises(SystemExit):
            run_cli("frobnicate")
