"""Baseline sequential JPEG codec with direct access to quantized coefficients.

Decoding accepts SOF0/SOF1 Huffman streams with 8-bit samples and one or three
components, interleaved or not, with or without restart intervals. Encoding
emits a bare JFIF stream: SOI, APP0, DQT, SOF0, DHT, optional DRI, SOS, EOI.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from ..jpeg_structure import MalformedStructure, scan_segments
from ..raster import Raster, round_half_away, round_to_u8
from . import _entropy
from .tables import (
    AC_CHROMA_BITS, AC_CHROMA_VALS, AC_LUMA_BITS, AC_LUMA_VALS, CHROMA_QUANT,
    DC_CHROMA_BITS, DC_CHROMA_VALS, DC_LUMA_BITS, DC_LUMA_VALS, LUMA_QUANT,
    UNZIGZAG, ZIGZAG, huffman_codes, scaled_quant_table,
)


class JpegError(ValueError):
    pass


class UnsupportedCoding(JpegError):
    """Progressive, arithmetic, lossless, 12-bit or CMYK streams."""


class CorruptStream(JpegError):
    """The stream is structurally broken or its entropy data does not decode."""


def _dct_matrix() -> np.ndarray:
    u = np.arange(8)[:, None]
    x = np.arange(8)[None, :]
    c = np.cos((2 * x + 1) * u * np.pi / 16) / 2
    c[0, :] = np.sqrt(1 / 8)
    return c


DCT = _dct_matrix()

# Blocks transformed per batch; bounds float64 scratch memory.
_CHUNK = 1 << 15


def fdct(blocks: np.ndarray) -> np.ndarray:
    """Forward 2-D DCT of level-shifted (N, 8, 8) blocks."""
    return DCT @ blocks @ DCT.T


def idct(coefs: np.ndarray) -> np.ndarray:
    return DCT.T @ coefs @ DCT


@dataclass(frozen=True, eq=False)
class ComponentPlane:
    """Quantized coefficients of one component, natural order per block.

    ``blocks`` has shape ``(blocks_high, blocks_wide, 64)`` where each grid
    dimension is ceil(component samples / 8).
    """

    component_id: int
    h: int
    v: int
    quant_index: int
    blocks: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, ComponentPlane):
            return NotImplemented
        return (
            (self.component_id, self.h, self.v, self.quant_index)
            == (other.component_id, other.h, other.v, other.quant_index)
            and self.blocks.shape == other.blocks.shape
            and bool(np.array_equal(self.blocks, other.blocks))
        )


@dataclass(frozen=True, eq=False)
class CoefficientPlanes:
    width: int
    height: int
    components: tuple[ComponentPlane, ...]
    quant_tables: dict[int, np.ndarray] = field(default_factory=dict)
    restart_interval: int = 0

    @property
    def sampling(self) -> tuple[tuple[int, int], ...]:
        return tuple((c.h, c.v) for c in self.components)

    @property
    def subsampled(self) -> bool:
        return len({(c.h, c.v) for c in self.components}) > 1

    def replace_component(self, index: int, blocks: np.ndarray) -> "CoefficientPlanes":
        comps = list(self.components)
        old = comps[index]
        comps[index] = ComponentPlane(old.component_id, old.h, old.v, old.quant_index, blocks)
        return CoefficientPlanes(self.width, self.height, tuple(comps),
                                 dict(self.quant_tables), self.restart_interval)

    def __eq__(self, other):
        if not isinstance(other, CoefficientPlanes):
            return NotImplemented
        if (self.width, self.height, self.components) != (other.width, other.height, other.components):
            return False
        if set(self.quant_tables) != set(other.quant_tables):
            return False
        return all(np.array_equal(self.quant_tables[k], other.quant_tables[k]) for k in self.quant_tables)


@dataclass(frozen=True)
class EncodeParams:
    quality: int = 90
    subsampling: str = "444"
    restart_interval: int = 0

    def __post_init__(self):
        if not 1 <= self.quality <= 100:
            raise ValueError(f"quality must be in 1..100, got {self.quality}")
        if self.subsampling not in ("444", "420"):
            raise ValueError(f"subsampling must be '444' or '420', got {self.subsampling!r}")
        if not 0 <= self.restart_interval <= 0xFFFF:
            raise ValueError("restart_interval must fit in 16 bits")


# ---------------------------------------------------------------------------
# Geometry and scheduling

def _mcu_geometry(width, height, sampling):
    hmax = max(h for h, _ in sampling)
    vmax = max(v for _, v in sampling)
    mcux = -(-width // (8 * hmax))
    mcuy = -(-height // (8 * vmax))
    return hmax, vmax, mcux, mcuy


def _component_blocks(width, height, h, v, hmax, vmax):
    cw = -(-width * h // hmax)
    ch = -(-height * v // vmax)
    return -(-ch // 8), -(-cw // 8)


def _schedule(comp_indices, sampling, offsets, mcux, mcuy):
    """Destination rows per MCU for a scan over ``comp_indices``."""
    if len(comp_indices) == 1:
        c = comp_indices[0]
        h, v = sampling[c]
        wpad = mcux * h
        bh, bw = offsets[c][1]
        rows = offsets[c][0] + (np.arange(bh)[:, None] * wpad + np.arange(bw)[None, :])
        return rows.reshape(-1, 1).astype(np.int64), np.zeros(1, dtype=np.int64)
    parts = []
    slots = []
    my = np.arange(mcuy)[:, None, None, None]
    mx = np.arange(mcux)[None, :, None, None]
    for slot, c in enumerate(comp_indices):
        h, v = sampling[c]
        dy = np.arange(v)[None, None, :, None]
        dx = np.arange(h)[None, None, None, :]
        rows = offsets[c][0] + (my * v + dy) * (mcux * h) + mx * h + dx
        parts.append(rows.reshape(mcuy * mcux, v * h))
        slots.extend([slot] * (v * h))
    return np.concatenate(parts, axis=1).astype(np.int64), np.array(slots, dtype=np.int64)


# ---------------------------------------------------------------------------
# Decoding

def _u8(payload, pos):
    if pos >= len(payload):
        raise CorruptStream("segment payload too short")
    return payload[pos]


def _parse_dqt(payload, tables):
    pos = 0
    while pos < len(payload):
        pq_tq = payload[pos]
        pq, tq = pq_tq >> 4, pq_tq & 15
        if pq > 1 or tq > 3:
            raise CorruptStream(f"bad DQT table spec 0x{pq_tq:02X}")
        size = 128 if pq else 64
        raw = payload[pos + 1:pos + 1 + size]
        if len(raw) != size:
            raise CorruptStream("truncated DQT table")
        zz = np.frombuffer(raw, dtype=">u2" if pq else np.uint8).astype(np.uint16)
        if not zz.all():
            raise CorruptStream("zero quantizer value")
        natural = np.empty(64, dtype=np.uint16)
        natural[ZIGZAG] = zz
        tables[tq] = natural
        pos += 1 + size


def _parse_dht(payload, dc_tables, ac_tables):
    pos = 0
    while pos < len(payload):
        tc_th = payload[pos]
        tc, th = tc_th >> 4, tc_th & 15
        if tc > 1 or th > 3:
            raise CorruptStream(f"bad DHT table spec 0x{tc_th:02X}")
        bits = tuple(payload[pos + 1:pos + 17])
        if len(bits) != 16:
            raise CorruptStream("truncated DHT counts")
        total = sum(bits)
        vals = tuple(payload[pos + 17:pos + 17 + total])
        if len(vals) != total or total > 256:
            raise CorruptStream("truncated DHT values")
        # Reject over-subscribed code spaces.
        space = 1
        for count in bits:
            space = space * 2 - count
            if space < 0:
                raise CorruptStream("over-subscribed Huffman table")
        (ac_tables if tc else dc_tables)[th] = (
            *_entropy.decode_tables(bits, vals), _entropy.lookup_table(bits, vals))
        pos += 17 + total


def _parse_sof(payload):
    if len(payload) < 6:
        raise CorruptStream("SOF segment too short")
    precision, height, width, ncomp = struct.unpack_from(">BHHB", payload)
    if len(payload) < 6 + 3 * ncomp:
        raise CorruptStream("SOF component list truncated")
    comps = []
    for i in range(ncomp):
        cid, hv, tq = payload[6 + 3 * i:9 + 3 * i]
        h, v = hv >> 4, hv & 15
        if not (1 <= h <= 4 and 1 <= v <= 4) or tq > 3:
            raise CorruptStream(f"bad sampling/quant spec for component {cid}")
        comps.append((cid, h, v, tq))
    if len({c[0] for c in comps}) != len(comps):
        raise CorruptStream("duplicate component id")
    return precision, height, width, comps


def decode_coefficients(data: bytes) -> CoefficientPlanes:
    """Entropy-decode a baseline JPEG into quantized coefficient planes."""
    data = bytes(data)
    try:
        segmap = scan_segments(data)
    except MalformedStructure as exc:
        raise CorruptStream(str(exc)) from exc
    if segmap.sof_code is None:
        raise CorruptStream("no frame header")
    if segmap.sof_code not in (0xC0, 0xC1):
        raise UnsupportedCoding(f"SOF{segmap.sof_code - 0xC0} coding is not supported")

    buf = np.frombuffer(data, dtype=np.uint8)
    qtables: dict[int, np.ndarray] = {}
    dc_tables: dict[int, tuple] = {}
    ac_tables: dict[int, tuple] = {}
    restart_interval = 0
    frame = None
    coefs = None
    scanned: set[int] = set()
    scan_iter = iter(segmap.scan_extents)

    for seg in segmap.segments:
        name = seg.marker.name
        payload = seg.payload(data)
        if name == "DQT":
            _parse_dqt(payload, qtables)
        elif name == "DHT":
            _parse_dht(payload, dc_tables, ac_tables)
        elif name == "DRI":
            if len(payload) < 2:
                raise CorruptStream("DRI segment too short")
            restart_interval = struct.unpack_from(">H", payload)[0]
        elif seg.marker.kind.value == "SOF" and frame is None:
            precision, height, width, comps = _parse_sof(payload)
            if precision != 8:
                raise UnsupportedCoding(f"{precision}-bit samples are not supported")
            if len(comps) not in (1, 3):
                raise UnsupportedCoding(f"{len(comps)}-component images are not supported")
            if height == 0:
                height = segmap.declared_height
            if width == 0 or height == 0:
                raise CorruptStream("zero image dimension")
            sampling = [(h, v) for _, h, v, _ in comps]
            hmax, vmax, mcux, mcuy = _mcu_geometry(width, height, sampling)
            for h, v in sampling:
                if hmax % h or vmax % v:
                    raise UnsupportedCoding("non-integral chroma sampling ratio")
            grids = [_component_blocks(width, height, h, v, hmax, vmax) for h, v in sampling]
            total_blocks = sum(bh * bw for bh, bw in grids)
            entropy_bytes = sum(n for _, n in segmap.entropy_spans)
            # Every block costs at least two bits (DC + EOB).
            if entropy_bytes * 4 < total_blocks:
                raise CorruptStream("entropy data too short for the declared dimensions")
            offsets = []
            row = 0
            for (h, v), grid in zip(sampling, grids):
                offsets.append((row, grid))
                row += (mcuy * v) * (mcux * h)
            coefs = np.zeros((row, 64), dtype=np.int16)
            frame = dict(width=width, height=height, comps=comps, sampling=sampling,
                         mcux=mcux, mcuy=mcuy, offsets=offsets, grids=grids)
        elif name == "SOS":
            extent = next(scan_iter, None)
            if frame is None:
                raise CorruptStream("scan before frame header")
            if extent is None:
                raise CorruptStream("scan without entropy data")
            _decode_one_scan(buf, payload, extent, frame, coefs, qtables,
                             dc_tables, ac_tables, restart_interval, scanned)

    if frame is None or not scanned:
        raise CorruptStream("no image data")
    planes = []
    for i, (cid, h, v, tq) in enumerate(frame["comps"]):
        if tq not in qtables:
            raise CorruptStream(f"missing quantization table {tq}")
        off, (bh, bw) = frame["offsets"][i]
        wpad = frame["mcux"] * h
        hpad = frame["mcuy"] * v
        grid = coefs[off:off + hpad * wpad].reshape(hpad, wpad, 64)[:bh, :bw]
        planes.append(ComponentPlane(cid, h, v, tq, np.ascontiguousarray(grid)))
    used = {c[3] for c in frame["comps"]}
    return CoefficientPlanes(frame["width"], frame["height"], tuple(planes),
                             {k: qtables[k] for k in sorted(used)}, restart_interval)


def _decode_one_scan(buf, payload, extent, frame, coefs, qtables, dc_tables,
                     ac_tables, restart_interval, scanned):
    if len(payload) < 1:
        raise CorruptStream("SOS segment too short")
    ns = payload[0]
    if not 1 <= ns <= 4 or len(payload) < 1 + 2 * ns + 3:
        raise CorruptStream("malformed SOS header")
    ids = [c[0] for c in frame["comps"]]
    comp_indices, dc_sel, ac_sel = [], [], []
    for i in range(ns):
        cid, sel = payload[1 + 2 * i], payload[2 + 2 * i]
        if cid not in ids:
            raise CorruptStream(f"scan references unknown component {cid}")
        comp_indices.append(ids.index(cid))
        dc_sel.append(sel >> 4)
        ac_sel.append(sel & 15)
    ss, se, ahal = payload[1 + 2 * ns:4 + 2 * ns]
    if (ss, se, ahal) != (0, 63, 0):
        raise UnsupportedCoding("spectral selection / successive approximation scan")
    sampling = frame["sampling"]
    if len(comp_indices) > 1 and sum(sampling[c][0] * sampling[c][1] for c in comp_indices) > 10:
        raise CorruptStream("interleaved MCU exceeds 10 blocks")

    maxcode = np.full((8, 18), -1, dtype=np.int32)
    valptr = np.zeros((8, 17), dtype=np.int32)
    mincode = np.zeros((8, 17), dtype=np.int32)
    huffval = np.zeros((8, 256), dtype=np.int32)
    look = np.zeros((8, 1 << _entropy.LOOKAHEAD), dtype=np.int32)
    for slot in range(ns):
        for base, sel, tables, kind in ((0, dc_sel[slot], dc_tables, "DC"),
                                        (4, ac_sel[slot], ac_tables, "AC")):
            if sel > 3 or sel not in tables:
                raise CorruptStream(f"scan uses undefined {kind} Huffman table {sel}")
            mc, vp, mn, hv, lk = tables[sel]
            maxcode[base + sel], valptr[base + sel] = mc, vp
            mincode[base + sel], huffval[base + sel] = mn, hv
            look[base + sel] = lk

    schedule, slot_of = _schedule(comp_indices, sampling, frame["offsets"],
                                  frame["mcux"], frame["mcuy"])
    start, end = extent
    status = _entropy.decode_scan(
        buf, start, end, restart_interval, schedule, slot_of,
        np.array(dc_sel, dtype=np.int64), np.array(ac_sel, dtype=np.int64), look,
        maxcode, valptr, mincode, huffval, ZIGZAG.astype(np.int64), coefs,
    )
    if status != _entropy.OK:
        raise CorruptStream(_entropy.STATUS_TEXT.get(status, f"entropy decoder status {status}"))
    scanned.update(comp_indices)


def _plane_samples(plane: ComponentPlane, table: np.ndarray) -> np.ndarray:
    """Dequantize + IDCT one component into a uint8 sample plane."""
    bh, bw, _ = plane.blocks.shape
    flat = plane.blocks.reshape(-1, 64)
    q = table.astype(np.float64).reshape(8, 8)
    out = np.empty((flat.shape[0], 8, 8), dtype=np.uint8)
    for lo in range(0, flat.shape[0], _CHUNK):
        chunk = flat[lo:lo + _CHUNK].astype(np.float64).reshape(-1, 8, 8) * q
        out[lo:lo + _CHUNK] = round_to_u8(idct(chunk) + 128.0)
    return out.reshape(bh, bw, 8, 8).transpose(0, 2, 1, 3).reshape(bh * 8, bw * 8)


def planes_to_raster(planes: CoefficientPlanes) -> Raster:
    w, h = planes.width, planes.height
    hmax = max(c.h for c in planes.components)
    vmax = max(c.v for c in planes.components)
    channels = []
    for comp in planes.components:
        samples = _plane_samples(comp, planes.quant_tables[comp.quant_index])
        fy, fx = vmax // comp.v, hmax // comp.h
        if fy > 1:
            samples = np.repeat(samples, fy, axis=0)
        if fx > 1:
            samples = np.repeat(samples, fx, axis=1)
        # Non-interleaved grids may be short of the MCU-padded size; edge-pad.
        if samples.shape[0] < h or samples.shape[1] < w:
            samples = np.pad(samples, ((0, max(0, h - samples.shape[0])),
                                       (0, max(0, w - samples.shape[1]))), mode="edge")
        channels.append(samples[:h, :w])
    if len(channels) == 1:
        return Raster(np.repeat(channels[0][:, :, None], 3, axis=2))
    y, cb, cr = (c.astype(np.float64) for c in channels)
    cb -= 128.0
    cr -= 128.0
    rgb = np.empty((h, w, 3), dtype=np.float64)
    rgb[..., 0] = y + 1.402 * cr
    rgb[..., 1] = y - 0.344136 * cb - 0.714136 * cr
    rgb[..., 2] = y + 1.772 * cb
    return Raster.from_float(rgb)


def jpeg_decode(data: bytes) -> Raster:
    """Pixels only: metadata, extra segments and trailing bytes are dropped."""
    return planes_to_raster(decode_coefficients(data))


# ---------------------------------------------------------------------------
# Encoding

def _ehuff(bits, vals):
    code = np.zeros(256, dtype=np.int64)
    size = np.zeros(256, dtype=np.int64)
    for sym, (c, n) in huffman_codes(bits, vals).items():
        code[sym] = c
        size[sym] = n
    return code, size


def _std_encode_tables():
    ehufco = np.zeros((8, 256), dtype=np.int64)
    ehufsi = np.zeros((8, 256), dtype=np.int64)
    for index, bits, vals in ((0, DC_LUMA_BITS, DC_LUMA_VALS), (1, DC_CHROMA_BITS, DC_CHROMA_VALS),
                              (4, AC_LUMA_BITS, AC_LUMA_VALS), (5, AC_CHROMA_BITS, AC_CHROMA_VALS)):
        ehufco[index], ehufsi[index] = _ehuff(bits, vals)
    return ehufco, ehufsi


_EHUFCO, _EHUFSI = _std_encode_tables()

_JFIF_APP0 = b"JFIF\x00" + bytes([1, 1, 0, 0, 1, 0, 1, 0, 0])


def _segment(code: int, payload: bytes) -> bytes:
    return bytes([0xFF, code]) + struct.pack(">H", len(payload) + 2) + payload


def _dht_payload(tc, th, bits, vals) -> bytes:
    return bytes([(tc << 4) | th]) + bytes(bits) + bytes(vals)


def encode_coefficients(planes: CoefficientPlanes) -> bytes:
    """Emit a JFIF baseline stream carrying exactly ``planes`` (no requantization)."""
    comps = planes.components
    if len(comps) not in (1, 3):
        raise ValueError("only 1- or 3-component planes can be encoded")
    if not (1 <= planes.width <= 0xFFFF and 1 <= planes.height <= 0xFFFF):
        raise ValueError("image dimensions out of JPEG range")
    sampling = [(c.h, c.v) for c in comps]
    hmax, vmax, mcux, mcuy = _mcu_geometry(planes.width, planes.height, sampling)
    for c in comps:
        expect = _component_blocks(planes.width, planes.height, c.h, c.v, hmax, vmax)
        if c.blocks.shape != (*expect, 64):
            raise ValueError(f"component {c.component_id} grid {c.blocks.shape[:2]} != {expect}")
        if c.quant_index not in planes.quant_tables:
            raise ValueError(f"missing quantization table {c.quant_index}")

    out = bytearray(b"\xff\xd8")
    out += _segment(0xE0, _JFIF_APP0)
    extended = False
    for index in sorted({c.quant_index for c in comps}):
        table = np.asarray(planes.quant_tables[index])
        zz = table[ZIGZAG]
        if zz.max() > 255:
            extended = True
            out += _segment(0xDB, bytes([0x10 | index]) + zz.astype(">u2").tobytes())
        else:
            out += _segment(0xDB, bytes([index]) + zz.astype(np.uint8).tobytes())
    sof = struct.pack(">BHHB", 8, planes.height, planes.width, len(comps))
    for c in comps:
        sof += bytes([c.component_id, (c.h << 4) | c.v, c.quant_index])
    out += _segment(0xC1 if extended else 0xC0, sof)
    dht = _dht_payload(0, 0, DC_LUMA_BITS, DC_LUMA_VALS) + _dht_payload(1, 0, AC_LUMA_BITS, AC_LUMA_VALS)
    if len(comps) > 1:
        dht += _dht_payload(0, 1, DC_CHROMA_BITS, DC_CHROMA_VALS)
        dht += _dht_payload(1, 1, AC_CHROMA_BITS, AC_CHROMA_VALS)
    out += _segment(0xC4, dht)
    if planes.restart_interval:
        out += _segment(0xDD, struct.pack(">H", planes.restart_interval))

    # Pad each grid with zero blocks up to whole MCUs.
    rows = []
    offsets = []
    row = 0
    for c in comps:
        hpad, wpad = mcuy * c.v, mcux * c.h
        padded = np.zeros((hpad, wpad, 64), dtype=np.int32)
        bh, bw, _ = c.blocks.shape
        padded[:bh, :bw] = c.blocks
        rows.append(padded.reshape(-1, 64))
        offsets.append((row, (bh, bw)))
        row += hpad * wpad
    coefs = np.concatenate(rows)

    interleave = len(comps) > 1 and sum(h * v for h, v in sampling) <= 10
    scans = [list(range(len(comps)))] if interleave else [[i] for i in range(len(comps))]
    for scan in scans:
        sos = bytes([len(scan)])
        for i in scan:
            table = 0 if i == 0 else 1
            sos += bytes([comps[i].component_id, (table << 4) | table])
        out += _segment(0xDA, sos + bytes([0, 63, 0]))
        schedule, slot_of = _schedule(scan, sampling, offsets, mcux, mcuy)
        sel = np.array([0 if i == 0 else 1 for i in scan], dtype=np.int64)
        capacity = 64 * schedule.size + 1024
        while True:
            buf = np.empty(capacity, dtype=np.uint8)
            status, n = _entropy.encode_scan(coefs, schedule, slot_of, sel, sel,
                                             _EHUFCO, _EHUFSI, planes.restart_interval,
                                             ZIGZAG.astype(np.int64), buf)
            if status != _entropy.OUT_OF_SPACE:
                break
            capacity *= 2
        if status != _entropy.OK:
            raise ValueError("coefficient out of baseline range: "
                             + _entropy.STATUS_TEXT.get(status, str(status)))
        out += buf[:n].tobytes()
    out += b"\xff\xd9"
    return bytes(out)


def raster_to_planes(raster: Raster, params: EncodeParams = EncodeParams()) -> CoefficientPlanes:
    """Colour-convert, transform and quantize a raster."""
    w, h = raster.width, raster.height
    sub = params.subsampling == "420"
    step = 16 if sub else 8
    hp, wp = -(-h // step) * step, -(-w // step) * step
    rgb = np.pad(raster.pixels, ((0, hp - h), (0, wp - w), (0, 0)), mode="edge").astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0
    cr = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0
    if sub:
        cb = cb.reshape(hp // 2, 2, wp // 2, 2).mean(axis=(1, 3))
        cr = cr.reshape(hp // 2, 2, wp // 2, 2).mean(axis=(1, 3))
    luma_q = scaled_quant_table(LUMA_QUANT, params.quality)
    chroma_q = scaled_quant_table(CHROMA_QUANT, params.quality)
    factor = 2 if sub else 1
    specs = [(1, factor, factor, 0, y, luma_q), (2, 1, 1, 1, cb, chroma_q), (3, 1, 1, 1, cr, chroma_q)]
    comps = []
    for cid, hs, vs, tq, plane, table in specs:
        ph, pw = plane.shape
        blocks = (plane - 128.0).reshape(ph // 8, 8, pw // 8, 8).transpose(0, 2, 1, 3)
        blocks = blocks.reshape(-1, 8, 8)
        q = table.astype(np.float64).reshape(8, 8)
        quant = np.empty((blocks.shape[0], 64), dtype=np.int16)
        for lo in range(0, blocks.shape[0], _CHUNK):
            quant[lo:lo + _CHUNK] = round_half_away(fdct(blocks[lo:lo + _CHUNK]) / q).reshape(-1, 64)
        grid = quant.reshape(ph // 8, pw // 8, 64)
        bh, bw = _component_blocks(w, h, hs, vs, factor, factor)
        comps.append(ComponentPlane(cid, hs, vs, tq, np.ascontiguousarray(grid[:bh, :bw])))
    return CoefficientPlanes(w, h, tuple(comps), {0: luma_q, 1: chroma_q}, params.restart_interval)


def jpeg_encode(raster: Raster, params: EncodeParams = EncodeParams()) -> bytes:
    return encode_coefficients(raster_to_planes(raster, params))


def zigzag_view(blocks: np.ndarray) -> np.ndarray:
    """Reorder the last axis of natural-order blocks into zig-zag order."""
    return blocks[..., ZIGZAG]


def natural_view(zz_blocks: np.ndarray) -> np.ndarray:
    return zz_blocks[..., UNZIGZAG]
