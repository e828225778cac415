import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from icdr.metrics import (
    DimensionMismatch, QualityScores, TooSmall, format_psnr, psnr, quality, ssim, uqi,
)
from icdr.raster import Raster
from icdr.stego import lsb_embed

from helpers import C1, C2, close, oracle_index, oracle_psnr, random_raster, smooth_raster

def test_psnr_analytic():
    black, white = Raster.filled(10, 10, (0, 0, 0)), Raster.filled(10, 10, (255, 255, 255))
    assert psnr(black, white) == 0.0
    a = random_raster(0, 100, 100)
    px = a.pixels.copy()
    px[50, 50, 1] ^= 1
    assert close(psnr(a, Raster(px)), 10 * math.log10(255 ** 2 * 30000))
    assert psnr(a, a) == math.inf


def test_identity_is_exact():
    r = random_raster(1, 20, 20)
    assert ssim(r, r) == 1.0
    assert uqi(r, r) == 1.0
    assert quality(r, r) == QualityScores(math.inf, 1.0, 1.0)
    flat = Raster.filled(12, 12, (7, 7, 7))
    assert uqi(flat, flat) == 1.0 and ssim(flat, flat) == 1.0


def test_inversion_scores_low():
    r = random_raster(2, 32, 32)
    inv = Raster(255 - r.pixels)
    assert ssim(r, inv) < 0.2
    assert close(ssim(r, inv), oracle_index(r, inv, C1, C2))


def test_anticorrelated_gradients():
    ramp = np.tile(np.arange(16, dtype=np.uint8) * 10 + 20, (16, 1))
    a = Raster(np.repeat(ramp[:, :, None], 3, axis=2))
    b = Raster(np.repeat(ramp[:, ::-1, None], 3, axis=2))
    assert uqi(a, b) < 0
    assert close(uqi(a, b), oracle_index(a, b, 0.0, 0.0))


def test_uqi_all_degenerate_is_zero():
    a = Raster.filled(8, 8, (0, 0, 0))
    assert uqi(a, Raster.filled(8, 8, (0, 0, 0))) == 1.0
    assert uqi(a, Raster.filled(8, 8, (5, 5, 5))) == 0.0


def test_quality_on_thin_images():
    a, b = random_raster(20, 5, 30), random_raster(21, 5, 30)
    scores = quality(a, b)
    assert close(scores.ssim, oracle_index(a, b, C1, C2, window=5))
    assert close(scores.uqi, oracle_index(a, b, 0.0, 0.0, window=5))
    one = quality(random_raster(22, 1, 1), random_raster(23, 1, 1))
    assert math.isfinite(one.psnr) and -1.0 <= one.uqi <= 1.0


def test_lsb_embed_uqi():
    r = smooth_raster(4, 128, 128)
    assert uqi(r, lsb_embed(r, b"x" * 500)) >= 0.999


def test_errors_and_format():
    with pytest.raises(DimensionMismatch):
        psnr(random_raster(0, 9, 9), random_raster(0, 9, 10))
    with pytest.raises(TooSmall):
        ssim(random_raster(0, 7, 9), random_raster(1, 7, 9))
    assert format_psnr(math.inf) == "inf"
    assert format_psnr(31.25) == "31.25"
    assert QualityScores(math.inf, 1.0, 1.0).to_dict() == {"psnr": "inf", "ssim": 1.0, "uqi": 1.0}


def test_oracle_agreement_on_fifty_pairs():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        a = Raster(rng.integers(0, 256, (16, 16, 3), dtype=np.uint8))
        noise = rng.integers(-40, 41, (16, 16, 3))
        b = Raster(np.clip(a.pixels.astype(int) + noise, 0, 255).astype(np.uint8))
        assert close(psnr(a, b), oracle_psnr(a, b))
        assert close(ssim(a, b), oracle_index(a, b, C1, C2))
        assert close(uqi(a, b), oracle_index(a, b, 0.0, 0.0))


def test_noise_lowers_scores():
    r = smooth_raster(5, 64, 64)
    rng = np.random.default_rng(5)
    last_psnr, ssims = math.inf, []
    for amp in (2, 5, 10, 20, 40):
        trials = []
        for _ in range(20):
            noisy = np.clip(r.pixels + rng.integers(-amp, amp + 1, r.pixels.shape), 0, 255)
            trials.append(Raster(noisy.astype(np.uint8)))
        p = np.mean([psnr(r, t) for t in trials])
        assert p < last_psnr
        last_psnr = p
        ssims.append(np.mean([ssim(r, t) for t in trials]))
    assert all(x > y for x, y in zip(ssims, ssims[1:]))


@given(seed=st.integers(0, 10 ** 6), w=st.integers(8, 24), h=st.integers(8, 24))
def test_symmetry_and_bounds(seed, w, h):
    a, b = random_raster(seed, w, h), random_raster(seed + 1, w, h)
    assert psnr(a, b) == psnr(b, a)
    assert close(ssim(a, b), ssim(b, a)) and close(uqi(a, b), uqi(b, a))
    assert -1.0 <= uqi(a, b) <= 1.0
    assert ssim(a, b) <= 1.0
