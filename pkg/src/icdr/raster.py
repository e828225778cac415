"""The decoded 8-bit RGB image every pipeline stage works on."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_PIXELS = 30_000_000


@dataclass(frozen=True, eq=False)
class Raster:
    """Row-major RGB pixels, shape ``(height, width, 3)``, dtype uint8.

    The array is made read-only on construction so a raster can be shared
    between threads and pipeline stages without defensive copies.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) pixels, got shape {px.shape}")
        if px.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {px.dtype}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("raster must have at least one pixel")
        if px.flags.writeable or not px.flags.c_contiguous:
            px = np.ascontiguousarray(px).copy()
            px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def size(self) -> tuple[int, int]:
        return self.width, self.height

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __repr__(self):
        return f"Raster({self.width}x{self.height})"

    @classmethod
    def filled(cls, width: int, height: int, color=(0, 0, 0)) -> "Raster":
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[:] = color
        return cls(px)

    @classmethod
    def from_float(cls, values: np.ndarray) -> "Raster":
        """Round half away from zero, clamp to [0, 255] and wrap."""
        return cls(round_to_u8(values))


def round_half_away(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    out = np.abs(values)
    out += 0.5
    np.floor(out, out=out)
    return np.copysign(out, values, out=out)


def round_to_u8(values: np.ndarray) -> np.ndarray:
    # Clamping first is equivalent and lets half-away rounding reduce to floor(v + 0.5).
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 255.0)
    v += 0.5
    return np.floor(v, out=v).astype(np.uint8)
