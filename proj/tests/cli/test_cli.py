"""End-to-end checks of the lbpnet executable (path in $LBPNET_CLI)."""

import json
import os
import pathlib
import struct
import subprocess

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]
DATA = ROOT / "data" / "mnist5k"
CLI = os.environ.get("LBPNET_CLI")

pytestmark = pytest.mark.skipif(not CLI, reason="LBPNET_CLI not set")


def run(*args, check=True):
    p = subprocess.run([CLI, *map(str, args)], capture_output=True, text=True)
    if check and p.returncode != 0:
        raise AssertionError(f"{args} exited {p.returncode}: {p.stderr}")
    return p


def read_idx_image(index):
    raw = (DATA / "t10k-images-idx3-ubyte").read_bytes()
    _, count, rows, cols = struct.unpack(">IIII", raw[:16])
    start = 16 + index * rows * cols
    label = (DATA / "t10k-labels-idx1-ubyte").read_bytes()[8 + index]
    return raw[start : start + rows * cols], rows, cols, label


def padded(pixels, rows, cols, size=32):
    top, left = (size - rows) // 2, (size - cols) // 2
    out = bytearray(size * size)
    for y in range(rows):
        out[(y + top) * size + left : (y + top) * size + left + cols] = pixels[y * cols : (y + 1) * cols]
    return bytes(out)


def desk_config(tmp, **dataset):
    cfg = json.loads((ROOT / "configs" / "mnist_desk.json").read_text())
    cfg["dataset"] = {
        "format": "idx",
        "train_images": str(DATA / "train-images-idx3-ubyte"),
        "train_labels": str(DATA / "train-labels-idx1-ubyte"),
        "test_images": str(DATA / "t10k-images-idx3-ubyte"),
        "test_labels": str(DATA / "t10k-labels-idx1-ubyte"),
        "pad_to": 32,
        **dataset,
    }
    cfg["out_dir"] = str(tmp / "run")
    return cfg


@pytest.fixture(scope="module")
def fresh(tmp_path_factory):
    """Checkpoint of an untrained network."""
    tmp = tmp_path_factory.mktemp("cli")
    cfg = desk_config(tmp, train_limit=64)
    cfg["optim"]["epochs"] = 0
    path = tmp / "config.json"
    path.write_text(json.dumps(cfg))
    run("train", "--config", path, "--out", tmp / "run")
    return tmp, path, tmp / "run" / "checkpoint.lbpn"


def test_train_outputs(fresh):
    tmp, _, ckpt = fresh
    assert ckpt.exists()
    assert (tmp / "run" / "metrics.jsonl").exists()
    assert json.loads((tmp / "run" / "config.json").read_text())["name"] == "mnist_desk"


def test_eval_fresh_model_is_at_chance(fresh):
    _, cfg, ckpt = fresh
    out = json.loads(run("eval", "--checkpoint", ckpt, "--config", cfg, "--json").stdout)
    assert out["samples"] == 1000
    assert abs(out["error"] - 0.9) <= 0.05


def test_export_infer_matches_eval_path(fresh):
    tmp, _, ckpt = fresh
    model = tmp / "model.lbpb"
    text = run("export", "--checkpoint", ckpt, "--out", model).stdout
    assert "LBP model size" in text and "total size" in text
    for index in (0, 7, 123):
        pixels, rows, cols, label = read_idx_image(index)
        img = padded(pixels, rows, cols)
        pgm = tmp / f"img{index}.pgm"
        pgm.write_bytes(b"P5\n32 32\n255\n" + img)
        inferred = json.loads(run("infer", "--model", model, "--image", pgm, "--json").stdout)
        for layer in inferred["ops"]:
            if layer["name"].endswith(".lbp"):
                assert layer["multiplications"] == 0 and layer["additions"] == 0

        csv = tmp / f"img{index}.csv"
        csv.write_text(f"{label}," + ",".join(str(b) for b in img) + "\n")
        cfg = desk_config(tmp)
        cfg["dataset"] = {"format": "csv", "train_csv": str(csv), "test_csv": str(csv),
                          "channels": 1, "height": 32, "width": 32, "pad_to": 32}
        cfg_path = tmp / f"one{index}.json"
        cfg_path.write_text(json.dumps(cfg))
        conf = json.loads(run("eval", "--checkpoint", ckpt, "--config", cfg_path, "--json").stdout)["confusion"]
        predicted = [p for p, n in enumerate(conf[label]) if n == 1]
        assert predicted == [inferred["class"]]


def test_cost_prints_size_line():
    out = run("cost", "--config", ROOT / "configs" / "mnist_rdp.json").stdout
    assert "1.59K" in out
    js = json.loads(run("cost", "--config", ROOT / "configs" / "mnist_rdp.json", "--json").stdout)
    assert js["total_cycles"] == 2617344


def test_inspect_writes_dumps(fresh):
    tmp, cfg, ckpt = fresh
    out = tmp / "inspect"
    run("inspect", "--checkpoint", ckpt, "--config", cfg, "--index", 3, "--out", out)
    assert (out / "patterns.json").exists()
    assert list(out.glob("block0_ch*.pgm"))


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"network": {"hiden": 1}}')
    assert run("cost", "--config", bad, check=False).returncode == 2
    assert run("infer", "--model", tmp_path / "missing.lbpb", "--image", tmp_path / "x.pgm", check=False).returncode == 3
    assert run("train", check=False).returncode == 2


def test_train_logs_one_line_per_epoch(tmp_path):
    cfg = desk_config(tmp_path, train_limit=64, test_limit=50)
    cfg["optim"]["epochs"] = 2
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    run("train", "--config", path, "--seed", 3, "--out", tmp_path / "run")
    lines = (tmp_path / "run" / "metrics.jsonl").read_text().splitlines()
    metrics = [json.loads(l) for l in lines]
    assert [m["epoch"] for m in metrics] == [1, 2]
    assert all(0.0 <= m["test_error"] <= 1.0 for m in metrics)
    assert json.loads((tmp_path / "run" / "config.json").read_text())["seed"] == 3
