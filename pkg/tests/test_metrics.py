import numpy as np
import pytest

from memfill.errors import ContractViolationError
from memfill.metrics import l1_metric, psnr, ssim


def test_identical_images():
    x = np.random.default_rng(0).uniform(0, 1, (3, 16, 16)).astype(np.float32)
    assert psnr(x, x) == 100.0
    assert ssim(x, x) == 1.0
    assert l1_metric(x, x) == 0.0


def test_psnr_formula():
    a = np.zeros((1, 8, 8), dtype=np.float64)
    b = np.full((1, 8, 8), 0.1, dtype=np.float64)
    assert psnr(a, b) == pytest.approx(20.0, abs=1e-6)


def test_l1_percent():
    a = np.full((1, 4, 4), 0.5, dtype=np.float32)
    b = np.zeros((1, 4, 4), dtype=np.float32)
    assert l1_metric(a, b) == pytest.approx(50.0)


def test_psnr_monotone_in_mse():
    rng = np.random.default_rng(1)
    base = rng.uniform(0.3, 0.7, (1, 8, 8))
    last = np.inf
    for scale in (0.01, 0.05, 0.1, 0.2):
        noisy = np.clip(base + scale, 0, 1)
        value = psnr(base, noisy)
        assert value < last
        last = value


def test_ssim_decreases_with_noise():
    rng = np.random.default_rng(2)
    base = rng.uniform(0.2, 0.8, (1, 16, 16))
    noisy = np.clip(base + rng.normal(0, 0.2, base.shape), 0, 1)
    assert ssim(base, noisy) < 1.0


def test_range_validated():
    ok = np.zeros((1, 8, 8))
    bad = np.full((1, 8, 8), 1.5)
    for fn in (psnr, ssim, l1_metric):
        with pytest.raises(ContractViolationError):
            fn(ok, bad)


def test_shape_mismatch():
    with pytest.raises(ContractViolationError):
        psnr(np.zeros((1, 8, 8)), np.zeros((1, 8, 9)))


def test_ssim_needs_window():
    with pytest.raises(ContractViolationError):
        ssim(np.zeros((1, 4, 4)), np.zeros((1, 4, 4)))
