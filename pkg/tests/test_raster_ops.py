import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from icdr.raster import Raster, round_half_away, round_to_u8
from icdr.raster_ops import (
    apply_stack, bilateral_filter, cycle_size, detox_lut, detox_transfer, filter_stacks,
    gaussian_blur, gaussian_kernel, median_filter, resize_bilinear, resize_cycle, sharpen,
)
from icdr.stego import lsb_embed, lsb_extract, msb_embed, msb_extract

from helpers import random_raster, smooth_raster


def scalar_bilinear(src: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    """Pixel-by-pixel half-pixel-centre bilinear sampling."""
    h, w, _ = src.shape
    out = np.zeros((new_h, new_w, 3), dtype=np.uint8)
    for y in range(new_h):
        sy = min(max((y + 0.5) * h / new_h - 0.5, 0.0), h - 1)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, h - 1)
        wy = sy - y0
        for x in range(new_w):
            sx = min(max((x + 0.5) * w / new_w - 0.5, 0.0), w - 1)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, w - 1)
            wx = sx - x0
            for c in range(3):
                top = src[y0, x0, c] * (1 - wx) + src[y0, x1, c] * wx
                bot = src[y1, x0, c] * (1 - wx) + src[y1, x1, c] * wx
                out[y, x, c] = min(255, max(0, math.floor(top * (1 - wy) + bot * wy + 0.5)))
    return out


def test_rounding_is_half_away_from_zero():
    assert round_half_away(np.array([0.5, 1.5, 2.5, -0.5, -2.5])).tolist() == [1, 2, 3, -1, -3]
    assert round_to_u8(np.array([-3.0, 0.49, 127.5, 254.5, 300.0])).tolist() == [0, 0, 128, 255, 255]


def test_resize_two_to_four():
    src = Raster(np.array([[[0] * 3, [200] * 3]], dtype=np.uint8))
    out = resize_bilinear(src, 4, 1)
    assert out.pixels[0, :, 0].tolist() == [0, 50, 150, 200]


def test_resize_average_of_four():
    px = np.array([[(10, 0, 255), (20, 100, 255)], [(30, 50, 0), (41, 7, 0)]], dtype=np.uint8)
    out = resize_bilinear(Raster(px), 1, 1).pixels[0, 0].astype(float)
    assert np.all(np.abs(out - px.reshape(4, 3).mean(axis=0)) <= 1)


@pytest.mark.parametrize("size", [(5, 7, 13, 3), (40, 30, 17, 29), (9, 9, 9, 4), (3, 1, 1, 6)])
def test_resize_matches_scalar_oracle(size):
    w, h, nw, nh = size
    r = random_raster(w * h, w, h)
    assert np.array_equal(resize_bilinear(r, nw, nh).pixels, scalar_bilinear(r.pixels, nw, nh))


def test_resize_cycle_geometry():
    assert cycle_size(100, 100, 0.97) == (97, 97)
    assert cycle_size(50, 150, 0.97) == (49, 146)  # 48.5 rounds up, 145.5 rounds up
    r = random_raster(0, 100, 100)
    assert resize_cycle(r).size == (100, 100)


def test_resize_cycle_breaks_msb():
    r = random_raster(1, 64, 64)
    carrier = msb_embed(r, b"hidden message " * 20)
    assert msb_extract(carrier) is not None
    assert msb_extract(resize_cycle(carrier)) is None


def test_gaussian_kernel_normalised():
    k = gaussian_kernel(1.0, 2)
    assert math.fsum(k) == 1.0
    assert np.allclose(k, k[::-1])
    with pytest.raises(ValueError):
        gaussian_kernel(0.0, 2)


def test_blur_single_white_pixel():
    px = np.zeros((9, 9, 3), dtype=np.uint8)
    px[4, 4] = 255
    k0 = gaussian_kernel(1.0, 2)[2]
    out = gaussian_blur(Raster(px), 1.0, 2)
    assert out.pixels[4, 4, 0] == math.floor(255 * k0 * k0 + 0.5)


def test_blur_reduces_variance():
    for seed in range(10):
        r = random_raster(seed, 30, 20)
        out = gaussian_blur(r)
        for c in range(3):
            assert out.pixels[:, :, c].var() < r.pixels[:, :, c].var()


def test_sharpen_centre_spike():
    px = np.zeros((5, 5, 3), dtype=np.uint8)
    px[2, 2] = 255
    out = sharpen(Raster(px)).pixels[:, :, 0]
    assert out[2, 2] == 255
    assert out[1, 2] == out[3, 2] == out[2, 1] == out[2, 3] == 0


def test_sharpen_restores_blur_on_random_rasters():
    wins = 0
    for seed in range(20):
        r = random_raster(seed, 48, 40)
        blurred = gaussian_blur(r)
        mae_blur = np.abs(blurred.pixels.astype(int) - r.pixels).mean()
        mae_both = np.abs(sharpen(blurred).pixels.astype(int) - r.pixels).mean()
        wins += mae_both < mae_blur
    assert wins >= 18


def test_median_outlier_and_oracle():
    px = np.full((7, 7, 3), 60, dtype=np.uint8)
    px[3, 3] = 250
    assert np.all(median_filter(Raster(px)).pixels == 60)

    r = random_raster(3, 11, 9)
    p = np.pad(r.pixels, ((1, 1), (1, 1), (0, 0)), mode="edge")
    expected = np.empty_like(r.pixels)
    for y in range(9):
        for x in range(11):
            for c in range(3):
                expected[y, x, c] = sorted(p[y:y + 3, x:x + 3, c].ravel())[4]
    assert np.array_equal(median_filter(r).pixels, expected)


def test_bilateral_wide_range_is_blur():
    r = random_raster(4, 20, 20)
    a = bilateral_filter(r, 1.0, 1e9, 2).pixels.astype(int)
    b = gaussian_blur(r, 1.0, 2).pixels.astype(int)
    assert np.abs(a - b).max() <= 1


def test_bilateral_keeps_edges():
    px = np.full((16, 16, 3), 40, dtype=np.uint8)
    px[:, 8:] = 200
    out = bilateral_filter(Raster(px), 1.0, 10.0, 2).pixels.astype(int)
    assert out[8, 8, 0] - out[8, 7, 0] >= 0.9 * 160


def test_detox_values():
    lut = detox_lut(0.97, 1.0)
    assert lut[0] == 0 and lut[255] == 255
    assert lut[128] == round(255 * (128 / 255) ** (1 / 0.97)) == 125
    for g in (0.951, 0.99, 1.01, 1.049):
        assert detox_lut(g)[0] == 0 and detox_lut(g)[255] == 255
    for g in (0.95, 1.0, 1.05, 0.9):
        with pytest.raises(ValueError):
            detox_lut(g)


def test_detox_breaks_lsb():
    carrier = lsb_embed(random_raster(5, 64, 64), b"payload" * 30)
    assert lsb_extract(detox_transfer(carrier)) is None


def test_filter_stacks_enumeration():
    stacks = filter_stacks(4)
    assert len(stacks) == 4 + 16 + 64 + 256
    assert stacks[0] == ("GBF",) and ("GBF", "SF") in stacks and ("SF", "GBF") in stacks
    r = random_raster(6, 12, 12)
    assert apply_stack(r, ("GBF", "SF")) == sharpen(gaussian_blur(r))


TRANSFORMS = [
    lambda r: gaussian_blur(r), lambda r: sharpen(r), lambda r: median_filter(r),
    lambda r: bilateral_filter(r), lambda r: detox_transfer(r), lambda r: resize_cycle(r, 0.97),
]


@given(color=st.tuples(*[st.integers(0, 255)] * 3), w=st.integers(2, 30), h=st.integers(2, 30),
       which=st.integers(0, len(TRANSFORMS) - 1))
def test_constants_preserved(color, w, h, which):
    r = Raster.filled(w, h, color)
    out = TRANSFORMS[which](r)
    assert out.size == r.size
    assert len(np.unique(out.pixels.reshape(-1, 3), axis=0)) == 1
    if which != 4:
        assert out == r


@given(seed=st.integers(0, 10 ** 6), w=st.integers(1, 25), h=st.integers(1, 25),
       nw=st.integers(1, 40), nh=st.integers(1, 40))
def test_resize_constant_and_size(seed, w, h, nw, nh):
    color = tuple(np.random.default_rng(seed).integers(0, 256, 3).tolist())
    out = resize_bilinear(Raster.filled(w, h, color), nw, nh)
    assert out == Raster.filled(nw, nh, color)


@given(seed=st.integers(0, 10 ** 6), which=st.integers(0, len(TRANSFORMS) - 1))
def test_transforms_deterministic(seed, which):
    r = random_raster(seed, 21, 17)
    a, b = TRANSFORMS[which](r), TRANSFORMS[which](r)
    assert a == b and a.size == r.size
