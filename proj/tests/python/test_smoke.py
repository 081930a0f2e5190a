import json
import math
import pathlib

import numpy as np
import pytest

import lbpnet

ROOT = pathlib.Path(__file__).resolve().parents[2]


def tiny_config(**overrides):
    cfg = {
        "input": {"channels": 1, "height": 8, "width": 8},
        "blocks": [{"kind": "mac_free", "lbp_out_channels": 3, "n_points": 4, "area": 5, "pool_after": True}],
        "hidden": 8,
        "classes": 3,
        "seed": 4,
    }
    cfg.update(overrides)
    return cfg


def test_bit_weights():
    img = np.zeros((3, 3))
    img[1, 1] = 0.5
    img[1, 2], img[0, 1], img[1, 0], img[2, 1] = 0.9, 0.8, 0.1, 0.7
    patterns = np.array([[[1, 0], [0, -1], [-1, 0], [0, 1]]], dtype=float)
    proj = np.zeros((1, 4), dtype=np.uint32)
    out = lbpnet.lbp_forward_hard(img, patterns, proj)
    assert out.shape == (1, 3, 3)
    assert out[0, 1, 1] == 11


def test_surrogate_tie_is_half():
    img = np.full((1, 1, 3), 0.3)
    out = lbpnet.lbp_forward_surrogate(img, np.array([[[1.0, 0.0]]]), np.zeros((1, 1), np.uint32), k=0.05)
    assert out[0, 0, 0] == pytest.approx(0.5)


def test_bilinear_and_relu():
    m = np.array([[0.0, 1.0], [2.0, 3.0]])
    assert lbpnet.bilinear_sample(m, 0, 0.5, 0.5) == pytest.approx(1.5)
    assert lbpnet.shifted_relu(3, 4) == 7
    assert lbpnet.shifted_relu(10, 4) == 10


def test_projection_matches_reference_values():
    t = lbpnet.build_projection(2018, 3, 4, 6)
    assert t.ravel().tolist() == [2, 2, 1, 2, 1, 2, 1, 0, 1, 0, 0, 1, 1, 2, 2, 1, 0, 1, 0, 1, 1, 0, 1, 1]
    assert (lbpnet.build_projection(1, 1, 4, 10) == 0).all()


def test_sizes_and_cost():
    net_cfg, _ = lbpnet.load_run_config(str(ROOT / "configs" / "mnist_rdp.json"))
    assert lbpnet.model_size(net_cfg) == 1597.5
    assert lbpnet.format_kilobytes(1597.5) == "1.59K"
    report = lbpnet.cost_report(net_cfg)
    assert report["total_cycles"] == 2617344
    assert report["lbp_model_size"] == "1.59K"
    assert lbpnet.gate_ratio() == pytest.approx(304 / 11)
    assert round(lbpnet.energy_ratio()) == 153


def test_packed_inference_matches_reference(tmp_path):
    net = lbpnet.create_network(tiny_config())
    rng = np.random.default_rng(0)
    patterns = net.patterns(0) + rng.normal(0, 0.3, size=net.patterns(0).shape)
    net.set_patterns(0, np.clip(patterns, -2, 2))
    packed = lbpnet.binarize(net)
    ref = lbpnet.rounded_network(net)
    for _ in range(5):
        img = rng.integers(0, 256, size=(1, 8, 8)) / 255.0
        label, scores, ops = lbpnet.infer(packed, img)
        assert label == ref.predict(img)
        assert np.array_equal(lbpnet.packed_features(packed, img), ref.forward_hard(img))
        assert ops["block0.lbp"]["comparisons"] == 8 * 8 * 3 * 4
        assert ops["block0.lbp"]["multiplications"] == 0
    path = tmp_path / "m.lbpb"
    packed.save(str(path))
    again = lbpnet.PackedModel.load(str(path))
    assert again == packed
    assert again.to_bytes() == path.read_bytes()
    assert packed.lbp_bits == 3 * 4 * 5


def test_train_and_checkpoint(tmp_path):
    rng = np.random.default_rng(1)
    labels = [i % 3 for i in range(30)]
    images = np.zeros((30, 1, 8, 8))
    for i, l in enumerate(labels):
        images[i, 0, :, 2 * l : 2 * l + 3] = 1.0
    images += rng.integers(0, 20, size=images.shape) / 255.0
    images = np.clip(images, 0, 1)
    net = lbpnet.create_network(tiny_config(dropout=0.0, input_dropout=0.0))
    metrics = lbpnet.train(net, images, labels, json.dumps({"epochs": 15, "batch_size": 10, "position_lr": 0.02, "weight_lr": 0.02}))
    assert len(metrics) == 15
    assert all(math.isfinite(m["train_loss"]) for m in metrics)
    assert metrics[-1]["train_loss"] < metrics[0]["train_loss"]
    err = lbpnet.evaluate(net, images, labels)
    assert 0.0 <= err <= 1.0
    path = tmp_path / "c.lbpn"
    net.save(str(path))
    back = lbpnet.Network.load(str(path))
    assert lbpnet.evaluate(back, images, labels) == err
    assert np.array_equal(back.patterns(0), net.patterns(0))


def test_errors_are_python_exceptions(tmp_path):
    with pytest.raises(ValueError):
        lbpnet.create_network(tiny_config(hiden=3))
    with pytest.raises(ValueError):
        lbpnet.lbp_forward_hard(np.zeros((2, 4, 4)), np.zeros((1, 1, 2)), np.array([[5]], np.uint32))
    bad = tmp_path / "bad.lbpb"
    bad.write_bytes(b"nope")
    with pytest.raises(OSError):
        lbpnet.PackedModel.load(str(bad))
