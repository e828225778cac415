"""Full-reference quality metrics: PSNR over RGB, SSIM and UQI on luma.

SSIM and UQI share one window engine: every 8x8 window at stride 1 over the
BT.601 luma plane. Window sums are accumulated exactly in int64 on
``1000 * Y`` (integer weights 299/587/114), so only the final per-window
formula runs in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .raster import Raster

WINDOW = 8
C1 = (0.01 * 255) ** 2
C2 = (0.03 * 255) ** 2
_DEGENERATE = 1e-8


class MetricError(ValueError):
    pass


class DimensionMismatch(MetricError):
    pass


class TooSmall(MetricError):
    pass


@dataclass(frozen=True)
class QualityScores:
    psnr: float
    ssim: float
    uqi: float

    def psnr_text(self) -> str:
        return format_psnr(self.psnr)

    def to_dict(self) -> dict:
        return {"psnr": self.psnr_text(), "ssim": self.ssim, "uqi": self.uqi}


def format_psnr(value: float) -> str:
    return "inf" if math.isinf(value) else repr(float(value))


def _check_same(a: Raster, b: Raster) -> None:
    if a.size != b.size:
        raise DimensionMismatch(f"{a.width}x{a.height} vs {b.width}x{b.height}")


def psnr(a: Raster, b: Raster) -> float:
    _check_same(a, b)
    diff = a.pixels.astype(np.int64) - b.pixels.astype(np.int64)
    sse = int(np.einsum("ijk,ijk->", diff, diff))
    if sse == 0:
        return math.inf
    mse = sse / diff.size
    return 10.0 * math.log10(255.0 ** 2 / mse)


def luma_milli(r: Raster) -> np.ndarray:
    """``1000 * Y`` as exact integers."""
    px = r.pixels.astype(np.int64)
    return 299 * px[:, :, 0] + 587 * px[:, :, 1] + 114 * px[:, :, 2]


def _window_sums(plane: np.ndarray, k: int) -> np.ndarray:
    """Sum over every k x k window via an integral image."""
    s = np.zeros((plane.shape[0] + 1, plane.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(plane, axis=0), axis=1, out=s[1:, 1:])
    return s[k:, k:] - s[:-k, k:] - s[k:, :-k] + s[:-k, :-k]


def _window_stats(a: Raster, b: Raster, k: int = WINDOW):
    """Means, population variances and covariance per k x k window, in luma units."""
    _check_same(a, b)
    if min(a.width, a.height) < k:
        raise TooSmall(f"{a.width}x{a.height} is smaller than the {k}x{k} window")
    x = luma_milli(a)
    y = luma_milli(b)
    n = k * k
    sx, sy = _window_sums(x, k), _window_sums(y, k)
    sxx, syy, sxy = _window_sums(x * x, k), _window_sums(y * y, k), _window_sums(x * y, k)
    # n * sum(x^2) - sum(x)^2 is exact in int64 (|values| < 2^63 for 8x8 windows).
    scale = float(n * n) * 1e6
    mx = sx / (n * 1000.0)
    my = sy / (n * 1000.0)
    vx = (n * sxx - sx * sx) / scale
    vy = (n * syy - sy * sy) / scale
    cxy = (n * sxy - sx * sy) / scale
    return mx, my, vx, vy, cxy


def _index(mx, my, vx, vy, cxy, c1, c2):
    num = (2 * mx * my + c1) * (2 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return num, den


def _ssim(stats) -> float:
    num, den = _index(*stats, C1, C2)
    return float(np.mean(num / den))


def ssim(a: Raster, b: Raster) -> float:
    return _ssim(_window_stats(a, b))


def uqi(a: Raster, b: Raster) -> float:
    """SSIM with both constants zero.

    Windows whose denominator vanishes count as 1 when both are the same
    constant and are left out of the mean otherwise; if every window is left
    out the result is 0.
    """
    return _uqi(_window_stats(a, b))


def _uqi(stats) -> float:
    mx, my, vx, vy, cxy = stats
    num, den = _index(mx, my, vx, vy, cxy, 0.0, 0.0)
    ok = np.abs(den) >= _DEGENERATE
    same_flat = ~ok & (vx == 0) & (vy == 0) & (mx == my)
    count = int(ok.sum()) + int(same_flat.sum())
    if count == 0:
        return 0.0
    total = math.fsum(num[ok] / den[ok]) + int(same_flat.sum())
    return total / count


def quality(a: Raster, b: Raster) -> QualityScores:
    """All three scores; images thinner than the window use one window as wide as they are."""
    if a == b:
        return QualityScores(math.inf, 1.0, 1.0)
    _check_same(a, b)
    stats = _window_stats(a, b, min(WINDOW, a.width, a.height))
    return QualityScores(psnr(a, b), _ssim(stats), _uqi(stats))
