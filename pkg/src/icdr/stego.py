"""Steganography attack tools and their extraction oracles.

Each tool hides a framed payload: ``b"SG"``, a 4-byte big-endian body length,
then the body, emitted most-significant bit first. An extractor returns the
body only when the magic matches and the declared length fits the carrier,
so ``None`` is an unambiguous "destroyed" signal.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

import numpy as np

from .codecs.jpeg import CoefficientPlanes
from .codecs.tables import ZIGZAG
from .raster import Raster
from .raster_ops import resize_bilinear

MAGIC = b"SG"
HEADER_BITS = 48


class CapacityExceeded(ValueError):
    def __init__(self, needed: int, capacity: int):
        super().__init__(f"payload needs {needed} bits, carrier holds {capacity}")
        self.needed = needed
        self.capacity = capacity


class Tool(str, enum.Enum):
    LSB = "lsb"
    MSB = "msb"
    DCT = "dct"
    ANTIRESIZE = "antiresize"


@dataclass(frozen=True)
class StegPayload:
    body: bytes

    def framed(self) -> bytes:
        return MAGIC + struct.pack(">I", len(self.body)) + self.body

    def bits(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.framed(), dtype=np.uint8))

    @property
    def bit_length(self) -> int:
        return 8 * (6 + len(self.body))


@dataclass(frozen=True)
class EmbedRecord:
    tool: Tool
    capacity_bits: int
    bits_used: int
    params: dict = field(default_factory=dict)


def _payload_bits(message: bytes, capacity: int) -> np.ndarray:
    bits = StegPayload(bytes(message)).bits()
    if len(bits) > capacity:
        raise CapacityExceeded(len(bits), capacity)
    return bits


def _unframe(bits: np.ndarray) -> bytes | None:
    """Decode a framed payload from a carrier's bit sequence, or None."""
    if len(bits) < HEADER_BITS:
        return None
    header = np.packbits(bits[:HEADER_BITS]).tobytes()
    if header[:2] != MAGIC:
        return None
    length = struct.unpack(">I", header[2:])[0]
    if HEADER_BITS + 8 * length > len(bits):
        return None
    return np.packbits(bits[HEADER_BITS:HEADER_BITS + 8 * length]).tobytes()


def capacity_bits(r: Raster) -> int:
    """Bits available to the LSB and MSB tools: one per channel sample."""
    return 3 * r.width * r.height


def _bitplane_embed(r: Raster, message: bytes, bit: int) -> Raster:
    flat = r.pixels.reshape(-1)
    bits = _payload_bits(message, flat.size).astype(np.uint8)
    out = flat.copy()
    n = len(bits)
    keep = np.uint8(0xFF ^ (1 << bit))
    out[:n] = (out[:n] & keep) | (bits << bit)
    return Raster(out.reshape(r.pixels.shape))


def _bitplane_extract(r: Raster, bit: int) -> bytes | None:
    return _unframe((r.pixels.reshape(-1) >> bit) & 1)


def lsb_embed(r: Raster, message: bytes) -> Raster:
    """Write the framed message into bit 0 of R, G, B samples in row-major order."""
    return _bitplane_embed(r, message, 0)


def lsb_extract(r: Raster) -> bytes | None:
    return _bitplane_extract(r, 0)


def msb_embed(r: Raster, message: bytes) -> Raster:
    """As :func:`lsb_embed` but targeting bit 7; visibly distorts the image."""
    return _bitplane_embed(r, message, 7)


def msb_extract(r: Raster) -> bytes | None:
    return _bitplane_extract(r, 7)


def _usable_coefficients(planes: CoefficientPlanes):
    """Zig-zag-ordered luma blocks and the mask of Jsteg-usable AC positions."""
    luma = planes.components[0].blocks
    zz = luma.reshape(-1, 64)[:, ZIGZAG]
    mask = (zz != 0) & (zz != 1)
    mask[:, 0] = False
    return zz, mask


def dct_capacity(planes: CoefficientPlanes) -> int:
    return int(_usable_coefficients(planes)[1].sum())


def dct_embed(planes: CoefficientPlanes, message: bytes) -> CoefficientPlanes:
    """Jsteg: overwrite the LSB of every luma AC coefficient not in {0, 1}.

    Setting the LSB never turns a usable value into 0 or 1, so the extractor
    sees the same set of positions.
    """
    zz, mask = _usable_coefficients(planes)
    bits = _payload_bits(message, int(mask.sum()))
    rows, cols = np.nonzero(mask)
    rows, cols = rows[:len(bits)], cols[:len(bits)]
    values = zz[rows, cols].astype(np.int32)
    zz[rows, cols] = (values & ~1) | bits
    luma = planes.components[0].blocks
    natural = np.empty_like(zz)
    natural[:, ZIGZAG] = zz
    return planes.replace_component(0, natural.reshape(luma.shape))


def dct_extract(planes: CoefficientPlanes) -> bytes | None:
    zz, mask = _usable_coefficients(planes)
    return _unframe((zz[mask] & 1).astype(np.uint8))


def antiresize_embed(message: bytes, block: int = 8, canvas: int = 4000,
                     seed: int = 0) -> Raster:
    """Build a canvas of uniform ``block``-sized cells, one payload bit per channel.

    Cell colours are mid-grey with seeded jitter of +-8 levels, and the
    payload bit replaces each channel's LSB. Replicating a cell over its
    whole block lets interpolating resizers reproduce the colour exactly.
    """
    if block < 1 or canvas < block:
        raise ValueError(f"invalid block {block} for canvas {canvas}")
    cells = canvas // block
    rng = np.random.default_rng(seed)
    grid = (128 + rng.integers(-8, 9, size=(cells, cells, 3))).astype(np.uint8).reshape(-1)
    bits = _payload_bits(message, grid.size).astype(np.uint8)
    grid[:len(bits)] = (grid[:len(bits)] & 0xFE) | bits
    grid = grid.reshape(cells, cells, 3)
    px = np.repeat(np.repeat(grid, block, axis=0), block, axis=1)
    if px.shape[0] != canvas:
        px = np.pad(px, ((0, canvas - px.shape[0]), (0, canvas - px.shape[1]), (0, 0)), mode="edge")
    return Raster(px)


def antiresize_extract(r: Raster, block: int = 8, canvas: int = 4000) -> bytes | None:
    if r.size != (canvas, canvas):
        r = resize_bilinear(r, canvas, canvas)
    cells = canvas // block
    centre = block // 2
    samples = r.pixels[centre:cells * block:block, centre:cells * block:block]
    return _unframe((samples.reshape(-1) & 1).astype(np.uint8))
