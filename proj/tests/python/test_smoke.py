"""Smoke tests for the pydeblur extension module."""

import math

import numpy as np
import pytest

import pydeblur


def test_audit_totals():
    audit = pydeblur.audit()
    gen = audit["generator"]
    assert gen["conv_total"] == 11_378_179
    assert gen["grand_total"] == 11_399_171
    assert gen["grand_total"] == gen["declared_total"]
    assert gen["mismatches"] == []

    disc = audit["discriminator"]
    assert disc["conv_total"] == 2_830_337
    assert disc["declared_total"] == 3_098_370
    assert disc["total_discrepancy"] == 268_033
    assert disc["mismatches"] == []


def test_specs_match_the_tables():
    gen = pydeblur.generator_spec()
    assert len(gen["layers"]) == 24
    assert len(gen["residual_pairs"]) == 9
    assert gen["global_skip"]
    first = gen["layers"][0]
    assert (first["kernel"], first["stride"], first["c_in"], first["c_out"]) == (7, 1, 3, 64)
    assert first["parameters"] == 9472

    disc = pydeblur.discriminator_spec()
    assert len(disc["layers"]) == 6
    assert disc["layers"][-1]["parameters"] == 8193

    assert pydeblur.layer_param_count(kernel=7, c_in=3, c_out=64) == 9472


def test_normalize_roundtrip():
    img = np.arange(256, dtype=np.uint8).reshape(16, 16)
    t = pydeblur.normalize(img)
    assert t.shape == (1, 16, 16, 1)
    assert t.min() == -1.0 and t.max() == 1.0
    back = pydeblur.denormalize(t)
    assert np.array_equal(back.reshape(16, 16), img)


def test_metrics():
    rng = np.random.default_rng(3)
    a = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
    assert math.isinf(pydeblur.psnr(a, a))
    assert pydeblur.ssim(a, a) == pytest.approx(1.0)

    b = a.copy()
    b[0, 0, 0] ^= 0xFF
    assert pydeblur.psnr(a, b) < math.inf
    assert pydeblur.psnr(a, b) == pytest.approx(pydeblur.psnr(b, a))


def test_blur_kernel():
    k = pydeblur.make_kernel(3, 0.0)
    assert k.shape == (1, 3)
    assert np.allclose(k, 1.0 / 3.0)
    assert pydeblur.make_kernel(9, 45.0).sum() == pytest.approx(1.0)

    img = np.zeros((33, 33, 3), dtype=np.uint8)
    img[16, 16] = 255
    out = pydeblur.apply_blur(img, 3, 0.0)
    assert out[16, 15, 0] == 85 and out[16, 16, 0] == 85 and out[16, 17, 0] == 85


def test_patch_planning():
    positions = pydeblur.plan_patches(720, 1280, 256, 256)
    assert len(positions) == 15
    rows = sorted({r for r, _ in positions})
    assert rows == [0, 256, 464]


def test_generator_forward_shape_and_range():
    gen = pydeblur.Generator(seed=5)
    assert gen.conv_param_count == 11_378_179
    x = np.random.default_rng(0).uniform(-1, 1, size=(1, 32, 32, 3)).astype(np.float32)
    y = gen.forward(x)
    assert y.shape == (1, 32, 32, 3)
    assert y.min() >= -1.0 and y.max() <= 1.0


def test_synthesis_and_training(tmp_path):
    data = str(tmp_path / "data")
    entries = pydeblur.make_synthetic_dataset(n=2, size=32, seed=7, out=data)
    assert len(entries) == 2

    run = str(tmp_path / "run")
    result = pydeblur.train(
        dataset_root=data, out_dir=run, epochs=1, batch_size=2, patch=16, seed=7
    )
    assert result["completed_steps"] == 1

    report = pydeblur.evaluate(data, split="train", checkpoint=result["checkpoint"],
                               patch=16, stride=16)
    assert len(report["per_image"]) == 2
    assert report["ssim"][2] <= 1.0
