"""Shared fixtures-as-functions for the test modules."""

from __future__ import annotations

import io
import math

import numpy as np
from PIL import Image

from icdr.codecs import EncodeParams, jpeg_encode
from icdr.corpus import synth_raster
from icdr.raster import Raster


def random_raster(seed: int, w: int = 32, h: int = 24) -> Raster:
    rng = np.random.default_rng(seed)
    return Raster(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


def smooth_raster(seed: int, w: int = 96, h: int = 80, kind: str = "photos") -> Raster:
    return synth_raster(seed, kind, size=(w, h))


def jpeg_of(r: Raster, quality: int = 90, subsampling: str = "444") -> bytes:
    return jpeg_encode(r, EncodeParams(quality, subsampling))


def pillow_jpeg(r: Raster, **kwargs) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(r.pixels)).save(buf, format="JPEG", **kwargs)
    return buf.getvalue()


def pillow_png(r: Raster, **kwargs) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(r.pixels)).save(buf, format="PNG", **kwargs)
    return buf.getvalue()


def pillow_pixels(data: bytes) -> np.ndarray:
    return np.asarray(Image.open(io.BytesIO(data)).convert("RGB"))


# Direct-summation metric oracle, independent of the vectorised engine.

C1 = (0.01 * 255) ** 2
C2 = (0.03 * 255) ** 2


def oracle_luma(r: Raster):
    px = r.pixels.astype(float)
    return [[0.299 * px[y, x, 0] + 0.587 * px[y, x, 1] + 0.114 * px[y, x, 2]
             for x in range(r.width)] for y in range(r.height)]


def oracle_index(a: Raster, b: Raster, c1: float, c2: float, window: int = 8) -> float:
    """Direct per-window summation, two-pass variances, no vectorisation."""
    ya, yb = oracle_luma(a), oracle_luma(b)
    k, n = window, window * window
    values = []
    for top in range(a.height - k + 1):
        for left in range(a.width - k + 1):
            xs = [ya[top + i][left + j] for i in range(k) for j in range(k)]
            ys = [yb[top + i][left + j] for i in range(k) for j in range(k)]
            mx, my = math.fsum(xs) / n, math.fsum(ys) / n
            vx = math.fsum((v - mx) ** 2 for v in xs) / n
            vy = math.fsum((v - my) ** 2 for v in ys) / n
            cxy = math.fsum((p - mx) * (q - my) for p, q in zip(xs, ys)) / n
            num = (2 * mx * my + c1) * (2 * cxy + c2)
            den = (mx * mx + my * my + c1) * (vx + vy + c2)
            if abs(den) < 1e-8:
                # Identical flat windows count as 1; other degenerate windows are skipped.
                if vx == 0 and vy == 0 and mx == my:
                    values.append(1.0)
                continue
            values.append(num / den)
    return math.fsum(values) / len(values) if values else 0.0


def oracle_psnr(a: Raster, b: Raster) -> float:
    d = [(int(p) - int(q)) ** 2 for p, q in zip(a.pixels.ravel(), b.pixels.ravel())]
    sse = sum(d)
    return math.inf if sse == 0 else 10 * math.log10(255 ** 2 * len(d) / sse)


def close(x, y, rel=1e-9):
    return abs(x - y) <= rel * max(abs(x), abs(y), 1e-300)
