import csv
import struct

import pytest

from dpmerf import cli, modelfile


@pytest.fixture(scope="module")
def grid_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("grid")
    assert cli.main(["make-gaussians", "--out-dir", str(out), "--samples-per-component", "40"]) == 0
    return out


def small_train(grid_dir, out, *extra):
    return ["train", "--data", str(grid_dir / "train.csv"), "--schema", str(grid_dir / "schema.json"),
            "--out-dir", str(out), "--num-features", "100", "--steps", "5", "--batch-size", "50",
            "--hidden", "8", *extra]


def kv(line):
    return dict(part.split("=", 1) for part in line.split())


def test_bound_closed_form(capsys):
    assert cli.main(["bound", "--num-features", "10000", "--num-samples", "60000", "--sigma", "0"]) == 0
    assert abs(float(kv(capsys.readouterr().out)["error_bound"]) - 0.20053) < 1e-4


def test_calibrate_prints_sigma(capsys):
    assert cli.main(["calibrate", "--epsilon", "1", "--delta", "1e-5"]) == 0
    first = kv(capsys.readouterr().out.splitlines()[0])
    assert abs(float(first["sigma"]) - 4.0474) < 1e-3
    assert float(first["epsilon"]) <= 1.0


def test_bad_delta_exit_2(capsys):
    assert cli.main(["calibrate", "--delta", "2"]) == 2
    assert "delta" in capsys.readouterr().err


def test_unsatisfiable_exit_3(grid_dir, tmp_path, capsys):
    assert cli.main(small_train(grid_dir, tmp_path / "r", "--epsilon", "1e-9", "--delta", "1e-9")) == 3
    assert not (tmp_path / "r" / "model.bin").exists()


def test_make_gaussians_outputs(grid_dir):
    with open(grid_dir / "train.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x0", "x1", "label"]
    assert len(rows) - 1 == 25 * 36  # 40 per component, 10% held out
    assert (grid_dir / "test.csv").exists() and (grid_dir / "schema.json").exists()


def test_bad_grid_args(tmp_path):
    assert cli.main(["make-gaussians", "--out-dir", str(tmp_path), "--std", "-1"]) == 2


def test_train_sample_evaluate(grid_dir, tmp_path, capsys):
    run = tmp_path / "run"
    assert cli.main(small_train(grid_dir, run)) == 0
    for name in ("model.bin", "trace.csv", "report.txt", "config.echo"):
        assert (run / name).exists()
    report = dict(line.split("=", 1) for line in (run / "report.txt").read_text().splitlines())
    assert report["mode"] == "balanced" and float(report["epsilon_consumed"]) <= 1.0
    with open(run / "trace.csv") as fh:
        assert len(list(csv.reader(fh))) == 6

    out = tmp_path / "syn.csv"
    assert cli.main(["sample", "--model", str(run / "model.bin"), "--n", "300", "--out", str(out)]) == 0
    with open(out) as fh:
        assert len(list(csv.reader(fh))) == 301
    capsys.readouterr()
    assert cli.main(["evaluate", "--train", str(out), "--test", str(grid_dir / "test.csv"),
                     "--schema", str(grid_dir / "schema.json"), "--classifier", "nearest_centroid",
                     "--grid"]) == 0
    lines = [kv(line) for line in capsys.readouterr().out.splitlines()]
    assert {d["metric"] for d in lines} == {"accuracy", "macro_f1", "nll", "mode_coverage"}


def test_sample_zero_rows(grid_dir, tmp_path):
    run = tmp_path / "run"
    assert cli.main(small_train(grid_dir, run, "--steps", "0")) == 0
    out = tmp_path / "empty.csv"
    assert cli.main(["sample", "--model", str(run / "model.bin"), "--n", "0", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1 and lines[0].count(",") == 2


def test_train_deterministic_across_dirs(grid_dir, tmp_path):
    assert cli.main(small_train(grid_dir, tmp_path / "a")) == 0
    assert cli.main(small_train(grid_dir, tmp_path / "b")) == 0
    assert (tmp_path / "a" / "model.bin").read_bytes() == (tmp_path / "b" / "model.bin").read_bytes()


def test_version_mismatch_exit_4(grid_dir, tmp_path):
    run = tmp_path / "run"
    assert cli.main(small_train(grid_dir, run, "--steps", "0")) == 0
    blob = bytearray((run / "model.bin").read_bytes())
    struct.pack_into("<I", blob, 8, modelfile.FORMAT_VERSION + 7)
    (run / "model.bin").write_bytes(bytes(blob))
    assert cli.main(["sample", "--model", str(run / "model.bin"), "--out", str(tmp_path / "s.csv")]) == 4


def test_evaluate_schema_mismatch_exit_2(grid_dir, tmp_path):
    other = tmp_path / "other"
    assert cli.main(["make-gaussians", "--out-dir", str(other), "--samples-per-component", "10"]) == 0
    schema = other / "schema.json"
    # both files parse, but the column sets differ
    schema.write_text(schema.read_text().replace('"x1"', '"y1"'))
    test_csv = other / "test.csv"
    test_csv.write_text(test_csv.read_text().replace("x0,x1,", "x0,y1,", 1))
    assert cli.main(["evaluate", "--train", str(grid_dir / "train.csv"),
                     "--test", str(other / "test.csv"), "--schema", str(grid_dir / "schema.json"),
                     "--test-schema", str(schema)]) == 2


def test_config_file_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[DEFAULT]\nsigma = 1.0\n\n[bound]\nnum-features = 100\nnum_samples = 1000\n")
    assert cli.main(["--config", str(cfg), "bound"]) == 0
    from_file = kv(capsys.readouterr().out)["error_bound"]
    assert cli.main(["--config", str(cfg), "bound", "--sigma", "0"]) == 0
    from_flag = kv(capsys.readouterr().out)["error_bound"]
    assert cli.main(["bound", "--num-features", "100", "--num-samples", "1000", "--sigma", "1"]) == 0
    assert kv(capsys.readouterr().out)["error_bound"] == from_file != from_flag


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[bound]\nsigmaa = 1\n")
    assert cli.main(["--config", str(cfg), "bound"]) == 2
    assert "sigmaa" in capsys.readouterr().err


def test_bad_mode_exit_2(grid_dir, tmp_path, capsys):
    assert cli.main(small_train(grid_dir, tmp_path / "r", "--mode", "weird")) == 2
    assert "mode" in capsys.readouterr().err
