import numpy as np
import pytest

import dlen


def test_image_round_trip(tmp_path):
    img = dlen.procedural_image(9, 5, seed=3)
    assert img.shape == (5, 9, 3)
    dlen.save_image(img, tmp_path / "a.ppm")
    np.testing.assert_array_equal(dlen.load_image(tmp_path / "a.ppm"), img)
    with pytest.raises(dlen.NotFoundError):
        dlen.load_image(tmp_path / "missing.ppm")
    (tmp_path / "bad.ppm").write_bytes(b"P6\n1 1\n65535\n\0\0\0\0\0\0")
    with pytest.raises(dlen.FormatError):
        dlen.load_image(tmp_path / "bad.ppm")


def test_metrics():
    a = dlen.procedural_image(16, 16, seed=1)
    assert dlen.psnr(a, a) == float("inf")
    assert dlen.psnr(np.zeros_like(a), np.ones_like(a)) == pytest.approx(0.0, abs=1e-9)
    assert dlen.ssim(a, a) == pytest.approx(1.0)
    low = dlen.synth_lowlight(a, gamma=2.0, gain=0.4, noise=0.0)
    np.testing.assert_allclose(low, 0.4 * a.astype(np.float64) ** 2, atol=1e-6)
    assert dlen.ssim(a, low, windowed=False) < 1.0


def test_wavelet_round_trip():
    x = np.random.default_rng(0).normal(size=(2, 3, 6, 8))
    bands = dlen.dwt2d(x)
    assert all(b.shape == (2, 3, 3, 4) for b in bands)
    np.testing.assert_allclose(dlen.idwt2d(*bands), x, atol=1e-12)
    energy = sum(float((b**2).sum()) for b in bands)
    assert energy == pytest.approx(float((x**2).sum()), rel=1e-12)


def test_model_identity_and_checkpoint(tmp_path):
    model = dlen.Model(width=4, seb_width=2, train_size=16, seed=1)
    img = dlen.procedural_image(13, 10, seed=2)
    out = model.enhance(img)
    assert out["i_en"].shape == img.shape
    np.testing.assert_array_equal(out["i_en"], out["i_lu"])
    model.save(tmp_path / "m.ckpt")
    back = dlen.Model.load(tmp_path / "m.ckpt")
    assert back.to_bytes() == model.to_bytes()
    assert back.config == model.config
    ablated = dlen.Model(width=4, seb_width=2, train_size=16, use_lwn=False, use_seab=False)
    assert ablated.parameter_count() < model.parameter_count()
    assert "i_feb" not in ablated.enhance(img)


def test_training_reduces_loss():
    high = [dlen.procedural_image(16, 16, seed=s) for s in range(2)]
    low = [dlen.synth_lowlight(h, seed=s) for s, h in enumerate(high)]
    model = dlen.Model(width=4, seb_width=2, train_size=16, seed=0)
    losses = model.train(low, high, iters=30, batch=2, crop=16, lr=1e-3, augment=False)
    assert len(losses) == 30
    assert losses[-1] < losses[0]


def test_cli_and_selftest():
    code, out, _ = dlen.cli(["--help"])
    assert code == 0 and "enhance" in out
    code, _, _ = dlen.cli(["train", "--no-such-flag"])
    assert code == 2
    assert all(ok for _, ok, _ in dlen.selftest(0))
