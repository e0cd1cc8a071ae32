import json

import numpy as np
import pytest

from omniseg.cli import main
from omniseg.dataio import read_image, read_mask, write_image
from omniseg.metrics import REPORT_COLUMNS


@pytest.fixture(scope="module")
def synthetic_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    rc = main(
        [
            "gen-synthetic",
            "--out",
            str(out),
            "--count",
            "4",
            "--val-count",
            "1",
            "--test-count",
            "1",
            "--size",
            "32",
            "--seed",
            "3",
        ]
    )
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def trained_dir(synthetic_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    rc = main(
        [
            "train",
            "--manifest",
            str(synthetic_dir / "manifest.csv"),
            "--out",
            str(out),
            "--epochs",
            "2",
            "--seed",
            "7",
            "--levels",
            "2",
            "--base-channels",
            "16",
        ]
    )
    assert rc == 0
    return out


def test_gen_synthetic_row_count(synthetic_dir):
    lines = (synthetic_dir / "manifest.csv").read_text().strip().splitlines()
    assert len(lines) - 1 == 7 * 6  # header + (4+1+1) per 7 tasks


def test_gen_synthetic_deterministic(tmp_path):
    args = ["gen-synthetic", "--count", "1", "--val-count", "0", "--test-count", "0",
            "--size", "16", "--seed", "9", "--out"]
    assert main(args + [str(tmp_path / "a")]) == 0
    assert main(args + [str(tmp_path / "b")]) == 0
    for name in ["manifest.csv", "SYNTHETIC/TUFT/TRAIN/img_0000.png"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_train_writes_log_and_checkpoints(trained_dir):
    log = (trained_dir / "train_log.txt").read_text().strip().splitlines()
    assert len(log) == 2
    assert all("val_dsc" in line for line in log)
    assert (trained_dir / "best.pt").exists()
    assert (trained_dir / "best").exists()


def test_train_seed_determinism(synthetic_dir, tmp_path):
    args = [
        "train", "--manifest", str(synthetic_dir / "manifest.csv"),
        "--epochs", "2", "--seed", "11", "--levels", "2", "--base-channels", "8",
    ]
    assert main(args + ["--out", str(tmp_path / "r1")]) == 0
    assert main(args + ["--out", str(tmp_path / "r2")]) == 0
    assert (tmp_path / "r1" / "train_log.txt").read_text() == (
        tmp_path / "r2" / "train_log.txt"
    ).read_text()


def test_train_missing_manifest(tmp_path):
    rc = main(["train", "--manifest", str(tmp_path / "nope.csv"), "--out", str(tmp_path)])
    assert rc == 2


def test_eval_report_columns(synthetic_dir, trained_dir, tmp_path):
    out = tmp_path / "eval"
    rc = main(
        [
            "eval",
            "--manifest",
            str(synthetic_dir / "manifest.csv"),
            "--checkpoint",
            str(trained_dir / "best.pt"),
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert "overall" in report
    for row in report.values():
        for col in REPORT_COLUMNS:
            assert col in row
            assert 0 <= row[col] <= 100
    text = (out / "report.txt").read_text()
    for col in REPORT_COLUMNS:
        assert col in text


def test_eval_byte_stable(synthetic_dir, trained_dir, tmp_path):
    args = [
        "eval", "--manifest", str(synthetic_dir / "manifest.csv"),
        "--checkpoint", str(trained_dir / "best.pt"),
    ]
    assert main(args + ["--out", str(tmp_path / "e1")]) == 0
    assert main(args + ["--out", str(tmp_path / "e2")]) == 0
    assert (tmp_path / "e1" / "report.txt").read_bytes() == (
        tmp_path / "e2" / "report.txt"
    ).read_bytes()


def test_eval_no_test_rows(synthetic_dir, trained_dir, tmp_path):
    # manifest with train rows only
    manifest = (synthetic_dir / "manifest.csv").read_text().splitlines()
    kept = [manifest[0]] + [l for l in manifest[1:] if ",TRAIN," in l]
    bad = tmp_path / "train_only.csv"
    bad.write_text("\n".join(kept) + "\n")
    rc = main(
        ["eval", "--manifest", str(bad), "--checkpoint", str(trained_dir / "best.pt"),
         "--out", str(tmp_path / "out")]
    )
    assert rc == 2


def test_predict_outputs_and_determinism(synthetic_dir, trained_dir, tmp_path):
    image = synthetic_dir / "SYNTHETIC" / "TUFT" / "TEST" / "img_0005.png"
    args = [
        "predict", "--checkpoint", str(trained_dir / "best.pt"),
        "--image", str(image), "--task", "TUFT", "--magnification", "5",
    ]
    assert main(args + ["--out", str(tmp_path / "p1")]) == 0
    mask = read_mask(tmp_path / "p1" / "mask.png")
    assert mask.shape == (32, 32)
    assert (tmp_path / "p1" / "overlay.png").exists()
    assert main(args + ["--out", str(tmp_path / "p2")]) == 0
    assert (tmp_path / "p1" / "mask.png").read_bytes() == (
        tmp_path / "p2" / "mask.png"
    ).read_bytes()


def test_predict_bad_size_suggests_stitch(trained_dir, tmp_path):
    img = tmp_path / "odd.png"
    write_image(img, np.zeros((30, 30, 3)))
    rc = main(
        ["predict", "--checkpoint", str(trained_dir / "best.pt"), "--image", str(img),
         "--task", "TUFT", "--magnification", "5", "--out", str(tmp_path / "o")]
    )
    assert rc == 2


def test_predict_unknown_task(synthetic_dir, trained_dir, tmp_path, capsys):
    image = synthetic_dir / "SYNTHETIC" / "TUFT" / "TEST" / "img_0005.png"
    rc = main(
        ["predict", "--checkpoint", str(trained_dir / "best.pt"), "--image", str(image),
         "--task", "NOPE", "--magnification", "5", "--out", str(tmp_path / "o")]
    )
    assert rc == 2
    assert "TUFT" in capsys.readouterr().err  # lists valid names


def test_stitch_cli(tmp_path):
    rng = np.random.default_rng(0)
    paths = []
    for i in range(4):
        p = tmp_path / f"patch{i}.png"
        write_image(p, rng.uniform(size=(16, 16, 3)))
        paths.append(str(p))
    out = tmp_path / "stitched.png"
    assert main(["stitch", *paths, "--out", str(out)]) == 0
    stitched = read_image(out)
    assert stitched.shape == (32, 32, 3)
    np.testing.assert_array_equal(stitched[:16, :16], read_image(paths[0]))
    np.testing.assert_array_equal(stitched[16:, 16:], read_image(paths[3]))
