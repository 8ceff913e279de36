import json

import numpy as np
import pytest

from rvsnn.cli import main
from rvsnn.mnist import SPLIT_FILES, write_idx_images, write_idx_labels


@pytest.fixture()
def tiny_data(tmp_path):
    """A miniature MNIST-shaped dataset directory: blobby digit per class."""
    rng = np.random.default_rng(13)
    images, labels = [], []
    for i in range(120):
        c = i % 10
        img = np.zeros((28, 28), np.uint8)
        cy, cx = 8 + (c * 13) % 12, 8 + (c * 7) % 12
        y, x = np.mgrid[0:28, 0:28]
        blob = np.exp(-(((y - cy) / 3.0) ** 2 + ((x - cx) / 3.0) ** 2)) * 255
        noise = rng.integers(0, 30, (28, 28))
        images.append(np.clip(blob + noise, 0, 255).astype(np.uint8))
        labels.append(c)
    images = np.stack(images)
    labels = np.array(labels, np.uint8)
    data_dir = tmp_path / "data"
    data_dir.mkdir()
    for split, (n0, n1) in (("train", (0, 100)), ("test", (100, 120))):
        img_name, lbl_name = SPLIT_FILES[split]
        (data_dir / img_name).write_bytes(write_idx_images(images[n0:n1]))
        (data_dir / lbl_name).write_bytes(write_idx_labels(labels[n0:n1]))
    return data_dir


FAST = ["--t-steps", "64", "--t-steps-train", "1", "--vth", "2400", "--leak", "80",
        "--theta", "96", "--i-inhibit", "4096"]


class TestAsmRun:
    def test_asm_then_run_exit_code(self, tmp_path, capsys):
        src = tmp_path / "p.s"
        src.write_text("addi a0, x0, 9\nebreak\n")
        out = tmp_path / "p.bin"
        assert main(["asm", str(src), "-o", str(out)]) == 0
        assert main(["run", str(out), "--mem-size", "0x100000"]) == 9

    def test_asm_idempotent(self, tmp_path):
        src = tmp_path / "p.s"
        src.write_text("loop: beq x0, x0, loop\n")
        out1, out2 = tmp_path / "a.bin", tmp_path / "b.bin"
        main(["asm", str(src), "-o", str(out1)])
        main(["asm", str(src), "-o", str(out2)])
        assert out1.read_bytes() == out2.read_bytes()

    def test_asm_error_diagnostics(self, tmp_path, capsys):
        src = tmp_path / "bad.s"
        src.write_text("nop\nbeq x0, x0, missing\n")
        assert main(["asm", str(src), "-o", str(tmp_path / "x.bin")]) == 1
        err = capsys.readouterr().err
        assert ":2:" in err and "missing" in err

    def test_run_trap_exit_2(self, tmp_path, capsys):
        src = tmp_path / "t.s"
        src.write_text(".word 0xffffffff\n")
        out = tmp_path / "t.bin"
        main(["asm", str(src), "-o", str(out)])
        assert main(["run", str(out), "--mem-size", "0x100000"]) == 2

    def test_counters_csv(self, tmp_path):
        src = tmp_path / "p.s"
        src.write_text("nop\nnop\nsnn.nu x1\nebreak\n")
        out = tmp_path / "p.bin"
        main(["asm", str(src), "-o", str(out)])
        csv = tmp_path / "c.csv"
        main(["run", str(out), "--counters", str(csv), "--mem-size", "0x100000"])
        lines = csv.read_text().strip().splitlines()
        assert lines[0].startswith("# config:")
        assert lines[1] == "mnemonic,count"
        assert "snn.nu,1" in lines

    def test_usage_error_exit_1(self, capsys):
        assert main(["asm"]) == 1


class TestTrainEval:
    def test_train_writes_model_and_report(self, tiny_data, tmp_path, capsys):
        model = tmp_path / "m.bin"
        rc = main(["train", "--data-dir", str(tiny_data), "-o", str(model),
                   "--neurons", "10", *FAST])
        assert rc == 0
        assert model.exists()
        report = json.loads((tmp_path / "m.bin.report.json").read_text())
        assert report["config"]["neurons"] == 10
        assert len(report["on_counts"]) == 10
        assert report["stages"][0]["trained_on"] == 100

    def test_determinism_byte_identical(self, tiny_data, tmp_path):
        models = []
        for name in ("a.bin", "b.bin"):
            path = tmp_path / name
            main(["train", "--data-dir", str(tiny_data), "-o", str(path),
                  "--neurons", "20", *FAST])
            models.append(path.read_bytes())
        assert models[0] == models[1]

    def test_eval_csv_consistency(self, tiny_data, tmp_path, capsys):
        model = tmp_path / "m.bin"
        main(["train", "--data-dir", str(tiny_data), "-o", str(model), *FAST])
        csv = tmp_path / "per_sample.csv"
        conf = tmp_path / "confusion.csv"
        rc = main(["eval", "--model", str(model), "--data-dir", str(tiny_data),
                   "--csv", str(csv), "--confusion", str(conf), *FAST])
        assert rc == 0
        out = capsys.readouterr().out
        lines = [l for l in csv.read_text().splitlines() if not l.startswith("#")]
        assert lines[0].startswith("index,label,predicted")
        assert len(lines) == 21          # header + 20 test samples
        # printed accuracy equals recomputation from the CSV
        rows = [l.split(",") for l in lines[1:]]
        acc = sum(r[1] == r[2] for r in rows) / len(rows)
        assert f"accuracy: {acc:.4f}" in out
        conf_rows = [l.split(",") for l in conf.read_text().splitlines()
                     if not l.startswith("#")][1:]
        total = sum(int(v) for row in conf_rows for v in row[1:])
        assert total == 20

    def test_eval_csvs_deterministic(self, tiny_data, tmp_path):
        model = tmp_path / "m.bin"
        main(["train", "--data-dir", str(tiny_data), "-o", str(model), *FAST])
        csvs = []
        for name in ("e1.csv", "e2.csv"):
            path = tmp_path / name
            main(["eval", "--model", str(model), "--data-dir", str(tiny_data),
                  "--csv", str(path), *FAST])
            csvs.append(path.read_bytes())
        assert csvs[0] == csvs[1]

    def test_neurons_validation(self, tiny_data, tmp_path, capsys):
        assert main(["train", "--data-dir", str(tiny_data), "-o",
                     str(tmp_path / "x.bin"), "--neurons", "7"]) == 1

    def test_missing_data_dir(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("RVSNN_MNIST_DIR", raising=False)
        assert main(["train", "-o", str(tmp_path / "x.bin")]) == 1


class TestCrosscheckCommand:
    def test_toy_passes(self, capsys):
        assert main(["crosscheck", "--toy", "--train", "--t-steps-toy", "16"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 2

    def test_model_sample(self, tiny_data, tmp_path, capsys):
        model = tmp_path / "m.bin"
        main(["train", "--data-dir", str(tiny_data), "-o", str(model), *FAST])
        rc = main(["crosscheck", "--model", str(model), "--data-dir", str(tiny_data),
                   "--sample", "3", "--train", "--t-steps", "16", *FAST[2:]])
        assert rc == 0


class TestCalibrateCommand:
    def test_single_point_grid(self, tiny_data, tmp_path, capsys):
        csv = tmp_path / "cal.csv"
        rc = main(["calibrate", "--data-dir", str(tiny_data), "--wexp-grid", "256",
                   "--holdout", "20", "--limit", "80", "--csv", str(csv),
                   "--best-out", str(tmp_path / "best.json"), *FAST])
        assert rc == 0
        rows = [l for l in csv.read_text().splitlines() if not l.startswith("#")]
        assert len(rows) == 2            # header + one grid point
        best = json.loads((tmp_path / "best.json").read_text())
        assert best["w_exp"] == 256

    def test_grid_rank_ordering(self, tiny_data, tmp_path):
        csv = tmp_path / "cal.csv"
        rc = main(["calibrate", "--data-dir", str(tiny_data),
                   "--wexp-grid", "128,256,512", "--holdout", "20", "--limit", "80",
                   "--csv", str(csv), *FAST])
        assert rc == 0
        rows = [l.split(",") for l in csv.read_text().splitlines()
                if not l.startswith("#")][1:]
        assert len(rows) == 3
        accs = [float(r[1]) for r in rows]
        assert accs == sorted(accs, reverse=True)

    def test_calibrate_deterministic(self, tiny_data, tmp_path):
        outs = []
        for name in ("c1.csv", "c2.csv"):
            path = tmp_path / name
            main(["calibrate", "--data-dir", str(tiny_data), "--wexp-grid", "128,512",
                  "--holdout", "20", "--limit", "80", "--csv", str(path), *FAST])
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]
