"""Minimal lossless PNG codec used as the transcode intermediate.

The encoder writes 8-bit truecolor, non-interlaced images with filter type 0
and stored (uncompressed) DEFLATE blocks. The decoder accepts any 8-bit
grayscale/RGB(A) non-interlaced PNG with filter types 0-4; alpha is dropped.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from ..raster import Raster

SIGNATURE = b"\x89PNG\r\n\x1a\n"
_STORED_MAX = 0xFFFF
_CHANNELS = {0: 1, 2: 3, 4: 2, 6: 4}


class PngError(ValueError):
    pass


class BadSignature(PngError):
    pass


class BadChecksum(PngError):
    pass


class UnsupportedPng(PngError):
    pass


class PixelLimitExceeded(UnsupportedPng):
    pass


def _chunk(kind: bytes, data: bytes) -> bytes:
    crc = zlib.crc32(data, zlib.crc32(kind))
    return struct.pack(">I", len(data)) + kind + data + struct.pack(">I", crc)


def _zlib_stored(data: bytes) -> bytes:
    """zlib container holding ``data`` in stored DEFLATE blocks (RFC 1950/1951)."""
    out = bytearray(b"\x78\x01")
    n = len(data)
    pos = 0
    while True:
        block = data[pos:pos + _STORED_MAX]
        pos += len(block)
        final = 1 if pos >= n else 0
        out.append(final)
        out += struct.pack("<HH", len(block), len(block) ^ 0xFFFF)
        out += block
        if final:
            break
    out += struct.pack(">I", zlib.adler32(data))
    return bytes(out)


def png_encode(raster: Raster) -> bytes:
    h, w = raster.height, raster.width
    rows = np.zeros((h, 1 + 3 * w), dtype=np.uint8)
    rows[:, 1:] = raster.pixels.reshape(h, 3 * w)
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    return (SIGNATURE + _chunk(b"IHDR", ihdr)
            + _chunk(b"IDAT", _zlib_stored(rows.tobytes())) + _chunk(b"IEND", b""))


def _inflate(stream: bytes, limit: int) -> bytes:
    if len(stream) < 6:
        raise PngError("zlib stream too short")
    cmf, flg = stream[0], stream[1]
    if cmf & 0x0F != 8 or ((cmf << 8) | flg) % 31 or flg & 0x20:
        raise PngError("bad zlib header")
    d = zlib.decompressobj(-15)
    try:
        data = d.decompress(stream[2:], limit + 1)
    except zlib.error as exc:
        raise PngError(f"bad DEFLATE data: {exc}") from exc
    if len(data) > limit:
        raise PngError("image data larger than the header declares")
    if not d.eof:
        raise PngError("truncated DEFLATE data")
    trailer = d.unused_data
    if len(trailer) < 4:
        raise PngError("missing Adler-32 trailer")
    if struct.unpack(">I", trailer[:4])[0] != zlib.adler32(data):
        raise BadChecksum("Adler-32 mismatch")
    return data


def _paeth(a, b, c):
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    return b if pb <= pc else c


def _unfilter(raw: bytes, height: int, stride: int, bpp: int) -> np.ndarray:
    if len(raw) != height * (stride + 1):
        raise PngError(f"image data is {len(raw)} bytes, expected {height * (stride + 1)}")
    rows = np.frombuffer(raw, dtype=np.uint8).reshape(height, stride + 1)
    out = np.zeros((height, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.uint8)
    for y in range(height):
        ftype = rows[y, 0]
        line = rows[y, 1:]
        if ftype == 0:
            cur = line.copy()
        elif ftype == 1:
            cur = _unfilter_sub(line, bpp)
        elif ftype == 2:
            cur = line + prev
        elif ftype in (3, 4):
            cur = bytearray(line.tobytes())
            up = prev.tobytes()
            for i in range(stride):
                left = cur[i - bpp] if i >= bpp else 0
                if ftype == 3:
                    cur[i] = (cur[i] + ((left + up[i]) >> 1)) & 0xFF
                else:
                    ul = up[i - bpp] if i >= bpp else 0
                    cur[i] = (cur[i] + _paeth(left, up[i], ul)) & 0xFF
            cur = np.frombuffer(bytes(cur), dtype=np.uint8)
        else:
            raise PngError(f"unknown filter type {ftype}")
        out[y] = cur
        prev = out[y]
    return out


def _unfilter_sub(line: np.ndarray, bpp: int) -> np.ndarray:
    n = len(line)
    pad = (-n) % bpp
    lanes = np.concatenate([line, np.zeros(pad, dtype=np.uint8)]).reshape(-1, bpp)
    summed = np.cumsum(lanes.astype(np.uint32), axis=0) & 0xFF
    return summed.astype(np.uint8).reshape(-1)[:n]


def png_decode(data: bytes, max_pixels: int | None = None) -> Raster:
    data = bytes(data)
    if data[:8] != SIGNATURE:
        raise BadSignature("not a PNG signature")
    pos = 8
    header = None
    idat = bytearray()
    seen_end = False
    while pos < len(data):
        if pos + 8 > len(data):
            raise PngError("truncated chunk header")
        length, kind = struct.unpack_from(">I4s", data, pos)
        body_end = pos + 8 + length
        if body_end + 4 > len(data):
            raise PngError(f"chunk {kind!r} runs past end of data")
        body = data[pos + 8:body_end]
        crc = struct.unpack_from(">I", data, body_end)[0]
        if crc != zlib.crc32(body, zlib.crc32(kind)):
            raise BadChecksum(f"CRC mismatch in {kind.decode('latin-1')} chunk")
        pos = body_end + 4
        if kind == b"IHDR":
            if length != 13:
                raise PngError("bad IHDR length")
            header = struct.unpack(">IIBBBBB", body)
        elif kind == b"IDAT":
            idat += body
        elif kind == b"IEND":
            seen_end = True
            break
        elif kind == b"PLTE" and header is not None and header[3] == 3:
            raise UnsupportedPng("palette images are not supported")
    if header is None:
        raise PngError("missing IHDR")
    if not seen_end:
        raise PngError("missing IEND")
    width, height, depth, ctype, comp, filt, interlace = header
    if depth != 8:
        raise UnsupportedPng(f"bit depth {depth} is not supported")
    if ctype == 3:
        raise UnsupportedPng("palette images are not supported")
    if ctype not in _CHANNELS:
        raise PngError(f"invalid color type {ctype}")
    if interlace:
        raise UnsupportedPng("interlaced images are not supported")
    if comp != 0 or filt != 0:
        raise PngError("unknown compression or filter method")
    if width == 0 or height == 0:
        raise PngError("zero image dimension")
    if max_pixels is not None and width * height > max_pixels:
        raise PixelLimitExceeded(f"{width}x{height} exceeds the {max_pixels}-pixel limit")
    channels = _CHANNELS[ctype]
    expected = height * (width * channels + 1)
    pixels = _unfilter(_inflate(bytes(idat), expected), height, width * channels, channels)
    pixels = pixels.reshape(height, width, channels)
    if channels in (1, 2):
        pixels = np.repeat(pixels[:, :, :1], 3, axis=2)
    else:
        pixels = pixels[:, :, :3]
    return Raster(np.ascontiguousarray(pixels))


def png_layout(data: bytes) -> tuple[list[bytes], int]:
    """Chunk type sequence and the offset just past IEND (or where walking stopped)."""
    kinds = []
    pos = 8
    while pos + 8 <= len(data):
        length, kind = struct.unpack_from(">I4s", data, pos)
        kinds.append(kind)
        pos = min(pos + 12 + length, len(data))
        if kind == b"IEND":
            break
    return kinds, pos


def png_chunk_types(data: bytes) -> list[bytes]:
    """Chunk type sequence, for cleanliness checks on emitted files."""
    return png_layout(data)[0]
