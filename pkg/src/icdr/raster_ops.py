"""Pixel-domain transforms: bilinear resizing, smoothing/sharpening filters and
the Detox transfer curve.

Every transform works in float64 (or exact integers) and rounds once at the
end, half away from zero, so results are bit-identical across platforms.
Borders are handled by clamping coordinates to the nearest edge pixel.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Sequence

import numpy as np
from numba import njit

from .raster import MAX_PIXELS, Raster, round_to_u8


def _axis_taps(src: int, dst: int):
    """Left index, right index and right weight for each output coordinate."""
    scale = src / dst
    pos = (np.arange(dst, dtype=np.float64) + 0.5) * scale - 0.5
    pos = np.clip(pos, 0.0, src - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, src - 1)
    return lo, hi, pos - lo


def resize_bilinear(r: Raster, new_w: int, new_h: int) -> Raster:
    """Half-pixel-centre bilinear resampling to ``new_w`` x ``new_h``."""
    if new_w < 1 or new_h < 1:
        raise ValueError(f"target size must be positive, got {new_w}x{new_h}")
    if new_w * new_h > MAX_PIXELS:
        raise ValueError(f"target size {new_w}x{new_h} exceeds {MAX_PIXELS} pixels")
    if (new_w, new_h) == r.size:
        return r
    x0, x1, fx = _axis_taps(r.width, new_w)
    y0, y1, fy = _axis_taps(r.height, new_h)
    return Raster(_bilinear(r.pixels, x0, x1, fx, y0, y1, fy))


@njit(cache=True)
def _bilinear(src, x0, x1, fx, y0, y1, fy):
    # Horizontal pass first, then vertical, with one final rounding.
    out = np.empty((len(y0), len(x0), 3), dtype=np.uint8)
    top = np.empty(3)
    bottom = np.empty(3)
    for y in range(len(y0)):
        ya, yb, wy = y0[y], y1[y], fy[y]
        for x in range(len(x0)):
            xa, xb, wx = x0[x], x1[x], fx[x]
            for c in range(3):
                top[c] = src[ya, xa, c] * (1.0 - wx) + src[ya, xb, c] * wx
                bottom[c] = src[yb, xa, c] * (1.0 - wx) + src[yb, xb, c] * wx
                v = top[c] * (1.0 - wy) + bottom[c] * wy
                out[y, x, c] = np.uint8(min(max(np.floor(v + 0.5), 0.0), 255.0))
    return out


def cycle_size(width: int, height: int, scale: float) -> tuple[int, int]:
    """Intermediate dimensions of a resize cycle, rounded half up."""
    return int(math.floor(width * scale + 0.5)), int(math.floor(height * scale + 0.5))


def resize_cycle(r: Raster, scale: float = 0.97) -> Raster:
    """Downscale by ``scale`` and resize back to the original dimensions."""
    if not 0.0 < scale < 1.0:
        raise ValueError(f"scale must be in (0, 1), got {scale}")
    w, h = cycle_size(r.width, r.height, scale)
    if w < 1 or h < 1:
        raise ValueError(f"scale {scale} collapses a {r.width}x{r.height} raster")
    return resize_bilinear(resize_bilinear(r, w, h), r.width, r.height)


def gaussian_kernel(sigma: float, radius: int) -> np.ndarray:
    """Normalised 1-D kernel of length ``2 * radius + 1``.

    The centre tap is set to one minus the exact sum of the others so the
    taps add up to 1 without accumulated rounding error.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(offsets ** 2) / (2.0 * sigma * sigma))
    k /= k.sum()
    k[radius] = 0.0
    k[radius] = 1.0 - math.fsum(k)
    return k


@njit(cache=True)
def _separable(src, kernel):
    """Horizontal then vertical convolution with clamped borders, rounded once."""
    h, w, _ = src.shape
    radius = len(kernel) // 2
    rows = np.empty((h, w, 3))
    for y in range(h):
        for x in range(w):
            for c in range(3):
                acc = 0.0
                for i in range(len(kernel)):
                    xx = min(max(x + i - radius, 0), w - 1)
                    acc += kernel[i] * src[y, xx, c]
                rows[y, x, c] = acc
    out = np.empty((h, w, 3), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            for c in range(3):
                acc = 0.0
                for i in range(len(kernel)):
                    yy = min(max(y + i - radius, 0), h - 1)
                    acc += kernel[i] * rows[yy, x, c]
                out[y, x, c] = np.uint8(min(max(np.floor(acc + 0.5), 0.0), 255.0))
    return out


def gaussian_blur(r: Raster, sigma: float = 1.0, radius: int = 2) -> Raster:
    return Raster(_separable(r.pixels, gaussian_kernel(sigma, radius)))


def sharpen(r: Raster) -> Raster:
    """3x3 sharpen: 5 at the centre, -1 on the four edge neighbours."""
    p = np.pad(r.pixels.astype(np.int32), ((1, 1), (1, 1), (0, 0)), mode="edge")
    h, w = r.height, r.width
    centre = p[1:h + 1, 1:w + 1]
    acc = 5 * centre - p[0:h, 1:w + 1] - p[2:h + 2, 1:w + 1] - p[1:h + 1, 0:w] - p[1:h + 1, 2:w + 2]
    return Raster(np.clip(acc, 0, 255).astype(np.uint8))


def _neighbourhood(plane: np.ndarray, radius: int):
    """Yield (dy, dx, shifted view) for every offset of the clamped window."""
    p = np.pad(plane, radius, mode="edge")
    h, w = plane.shape
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            yield dy, dx, p[radius + dy:radius + dy + h, radius + dx:radius + dx + w]


def median_filter(r: Raster, radius: int = 1) -> Raster:
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    out = np.empty_like(r.pixels)
    for c in range(3):
        stack = np.stack([v for _, _, v in _neighbourhood(r.pixels[:, :, c], radius)])
        # Window sizes are odd, so the median is always an actual sample.
        out[:, :, c] = np.partition(stack, stack.shape[0] // 2, axis=0)[stack.shape[0] // 2]
    return Raster(out)


def bilateral_filter(r: Raster, sigma_space: float = 1.0, sigma_range: float = 25.0,
                     radius: int = 2) -> Raster:
    """Edge-preserving smoothing, weights renormalised per pixel and channel."""
    if sigma_space <= 0 or sigma_range <= 0:
        raise ValueError("bilateral sigmas must be positive")
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    out = np.empty_like(r.pixels)
    range_coef = -1.0 / (2.0 * sigma_range * sigma_range)
    for c in range(3):
        plane = r.pixels[:, :, c].astype(np.float64)
        num = np.zeros_like(plane)
        den = np.zeros_like(plane)
        for dy, dx, shifted in _neighbourhood(plane, radius):
            spatial = math.exp(-(dy * dy + dx * dx) / (2.0 * sigma_space * sigma_space))
            weight = spatial * np.exp(range_coef * (shifted - plane) ** 2)
            num += weight * shifted
            den += weight
        out[:, :, c] = round_to_u8(num / den)
    return Raster(out)


def _gamma_allowed(gamma: float) -> bool:
    return 0.950 < gamma < 0.995 or 1.005 < gamma < 1.050


def detox_lut(gamma: float = 0.97, w: float = 1.0) -> np.ndarray:
    if not _gamma_allowed(gamma):
        raise ValueError(
            f"gamma must lie in (0.950, 0.995) or (1.005, 1.050), got {gamma}")
    if not 0.0 < w <= 1.0:
        raise ValueError(f"w must be in (0, 1], got {w}")
    v = np.arange(256, dtype=np.float64) / 255.0
    return round_to_u8(255.0 * w * v ** (1.0 / gamma))


def detox_transfer(r: Raster, gamma: float = 0.97, w: float = 1.0) -> Raster:
    """Per-channel power curve ``255 * w * (v / 255) ** (1 / gamma)``."""
    return Raster(detox_lut(gamma, w)[r.pixels])


# Short names used by the filter-stack tuning experiment.
FILTERS: dict[str, Callable[[Raster], Raster]] = {
    "GBF": gaussian_blur,
    "BSF": bilateral_filter,
    "MF": median_filter,
    "SF": sharpen,
}


def apply_stack(r: Raster, stack: Sequence[str]) -> Raster:
    for name in stack:
        r = FILTERS[name](r)
    return r


def filter_stacks(max_depth: int = 4) -> list[tuple[str, ...]]:
    """Every ordered stack (repeats allowed) of 1..max_depth filters, shortest first."""
    names = list(FILTERS)
    stacks = []
    for depth in range(1, max_depth + 1):
        stacks.extend(itertools.product(names, repeat=depth))
    return stacks
