"""Byte-level JPEG/JFIF scanner.

Maps a buffer into marker segments and entropy-coded spans without decoding
pixels, carves whatever follows the first EOI, pulls textual metadata out of
COM/APPn/EXIF segments and applies the pixel-count validity gate.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field, replace

from .raster import MAX_PIXELS


class MalformedStructure(ValueError):
    """The buffer is not a parseable JPEG stream.

    ``partial`` holds the segment map built up to the point of failure.
    """

    def __init__(self, message: str, partial: "SegmentMap"):
        super().__init__(message)
        self.partial = partial


class MarkerKind(enum.Enum):
    SOI = "SOI"
    EOI = "EOI"
    SOS = "SOS"
    SOF = "SOF"
    APP = "APP"
    COM = "COM"
    DQT = "DQT"
    DHT = "DHT"
    DRI = "DRI"
    RST = "RST"
    OTHER = "other"


_SOF_CODES = frozenset(range(0xC0, 0xD0)) - {0xC4, 0xC8, 0xCC}
_STANDALONE = frozenset([0xD8, 0x01, *range(0xD0, 0xD8)])
PROGRESSIVE_SOF = frozenset([0xC2, 0xC6, 0xCA, 0xCE])
ARITHMETIC_SOF = frozenset([0xC9, 0xCA, 0xCB, 0xCD, 0xCE, 0xCF])
SUPPORTED_SOF = frozenset([0xC0, 0xC1])

_OTHER_NAMES = {0xC8: "JPG", 0xCC: "DAC", 0xDC: "DNL", 0xDE: "DHP", 0xDF: "EXP", 0x01: "TEM"}


@dataclass(frozen=True)
class Marker:
    code: int
    offset: int

    def __post_init__(self):
        if self.code in (0x00, 0xFF):
            raise ValueError(f"0x{self.code:02X} is not a marker code")

    @property
    def kind(self) -> MarkerKind:
        c = self.code
        if c == 0xD8:
            return MarkerKind.SOI
        if c == 0xD9:
            return MarkerKind.EOI
        if c == 0xDA:
            return MarkerKind.SOS
        if c in _SOF_CODES:
            return MarkerKind.SOF
        if 0xE0 <= c <= 0xEF:
            return MarkerKind.APP
        if c == 0xFE:
            return MarkerKind.COM
        if c == 0xDB:
            return MarkerKind.DQT
        if c == 0xC4:
            return MarkerKind.DHT
        if c == 0xDD:
            return MarkerKind.DRI
        if 0xD0 <= c <= 0xD7:
            return MarkerKind.RST
        return MarkerKind.OTHER

    @property
    def name(self) -> str:
        kind = self.kind
        if kind is MarkerKind.SOF:
            return f"SOF{self.code - 0xC0}"
        if kind is MarkerKind.APP:
            return f"APP{self.code - 0xE0}"
        if kind is MarkerKind.RST:
            return f"RST{self.code - 0xD0}"
        if kind is MarkerKind.OTHER:
            return _OTHER_NAMES.get(self.code, f"0x{self.code:02X}")
        return kind.value


@dataclass(frozen=True)
class Segment:
    marker: Marker
    declared_length: int | None
    payload_span: tuple[int, int]

    @property
    def header_size(self) -> int:
        return 2 if self.declared_length is None else 4

    def payload(self, data: bytes) -> bytes:
        off, n = self.payload_span
        return bytes(data[off:off + n])


@dataclass(frozen=True)
class SegmentMap:
    length: int
    segments: tuple[Segment, ...] = ()
    entropy_spans: tuple[tuple[int, int], ...] = ()
    restart_markers: tuple[int, ...] = ()
    fill_spans: tuple[tuple[int, int], ...] = ()
    # (start, end) of each scan's entropy-coded data, RST markers included.
    scan_extents: tuple[tuple[int, int], ...] = ()
    trailing_payload: tuple[int, int] | None = None
    declared_width: int = 0
    declared_height: int = 0
    component_count: int = 0
    precision: int = 0
    sof_code: int | None = None
    error: str | None = None

    @property
    def progressive(self) -> bool:
        return self.sof_code in PROGRESSIVE_SOF

    @property
    def arithmetic(self) -> bool:
        return self.sof_code in ARITHMETIC_SOF

    @property
    def pixel_count(self) -> int:
        return self.declared_width * self.declared_height

    def find(self, name: str) -> list[Segment]:
        return [s for s in self.segments if s.marker.name == name]

    def attributed_bytes(self) -> int:
        """Total bytes covered by headers, payloads, entropy, RST, fill and trailer."""
        total = sum(s.header_size + s.payload_span[1] for s in self.segments)
        total += sum(n for _, n in self.entropy_spans)
        total += 2 * len(self.restart_markers)
        total += sum(n for _, n in self.fill_spans)
        if self.trailing_payload is not None:
            total += self.trailing_payload[1]
        return total

    def to_dict(self) -> dict:
        return {
            "length": self.length,
            "segments": [
                {
                    "marker": s.marker.name,
                    "offset": s.marker.offset,
                    "declared_length": s.declared_length,
                    "payload_offset": s.payload_span[0],
                    "payload_length": s.payload_span[1],
                }
                for s in self.segments
            ],
            "entropy_bytes": sum(n for _, n in self.entropy_spans),
            "restart_markers": len(self.restart_markers),
            "trailing_payload": (
                None if self.trailing_payload is None
                else {"offset": self.trailing_payload[0], "length": self.trailing_payload[1]}
            ),
            "width": self.declared_width,
            "height": self.declared_height,
            "components": self.component_count,
            "progressive": self.progressive,
            "error": self.error,
        }


def _be16(data, pos: int) -> int:
    return (data[pos] << 8) | data[pos + 1]


def scan_segments(data: bytes) -> SegmentMap:
    """Walk the marker structure of ``data`` up to and including the first EOI.

    Raises MalformedStructure for anything that is not a complete JPEG stream:
    missing SOI, a length field running past the buffer, stray bytes where a
    marker must be, or a stream with no EOI.
    """
    data = bytes(data)
    n = len(data)
    segments: list[Segment] = []
    entropy: list[tuple[int, int]] = []
    restarts: list[int] = []
    fills: list[tuple[int, int]] = []
    scans: list[tuple[int, int]] = []
    frame: dict = {}
    dnl_height = None

    def build(**extra) -> SegmentMap:
        height = frame.get("height", 0)
        if height == 0 and dnl_height is not None:
            height = dnl_height
        return SegmentMap(
            length=n,
            segments=tuple(segments),
            entropy_spans=tuple(entropy),
            restart_markers=tuple(restarts),
            fill_spans=tuple(fills),
            scan_extents=tuple(scans),
            declared_width=frame.get("width", 0),
            declared_height=height,
            component_count=frame.get("components", 0),
            precision=frame.get("precision", 0),
            sof_code=frame.get("code"),
            **extra,
        )

    def fail(message: str):
        raise MalformedStructure(message, build(error=message))

    if n < 2 or data[0] != 0xFF or data[1] != 0xD8:
        fail("no SOI marker at offset 0")
    segments.append(Segment(Marker(0xD8, 0), None, (2, 0)))
    pos = 2
    while True:
        if pos >= n:
            fail("stream ends without EOI")
        if data[pos] != 0xFF:
            fail(f"expected marker at offset {pos}, found 0x{data[pos]:02X}")
        start = pos
        while pos + 1 < n and data[pos + 1] == 0xFF:
            pos += 1
        if pos > start:
            fills.append((start, pos - start))
        if pos + 1 >= n:
            fail("stream ends inside a marker")
        code = data[pos + 1]
        if code == 0x00:
            fail(f"stuffed zero outside entropy-coded data at offset {pos}")
        marker = Marker(code, pos)
        if code == 0xD9:
            segments.append(Segment(marker, None, (pos + 2, 0)))
            pos += 2
            trailing = (pos, n - pos) if pos < n else None
            return build(trailing_payload=trailing)
        if code in _STANDALONE:
            segments.append(Segment(marker, None, (pos + 2, 0)))
            pos += 2
            continue
        if pos + 4 > n:
            fail(f"segment length at offset {pos + 2} runs past end of buffer")
        length = _be16(data, pos + 2)
        if length < 2:
            fail(f"invalid segment length {length} at offset {pos + 2}")
        if pos + 2 + length > n:
            fail(f"{marker.name} segment at offset {pos} declares {length} bytes, "
                 f"only {n - pos - 2} remain")
        segments.append(Segment(marker, length, (pos + 4, length - 2)))
        body = pos + 4
        if code in _SOF_CODES and "code" not in frame:
            if length < 8:
                fail(f"{marker.name} segment too short")
            frame.update(
                code=code,
                precision=data[body],
                height=_be16(data, body + 1),
                width=_be16(data, body + 3),
                components=data[body + 5],
            )
        elif code == 0xDC and length >= 4 and dnl_height is None:
            dnl_height = _be16(data, body)
        pos += 2 + length
        if code == 0xDA:
            pos = _scan_entropy(data, pos, entropy, restarts, scans)
            if pos < 0:
                fail("entropy-coded data runs to end of buffer without EOI")


def _scan_entropy(data: bytes, pos: int, entropy, restarts, scans) -> int:
    """Skip one scan's entropy-coded data; return the offset of the next marker."""
    n = len(data)
    scan_start = span_start = cursor = pos
    while True:
        j = data.find(b"\xff", cursor)
        if j < 0 or j + 1 >= n:
            if n > span_start:
                entropy.append((span_start, n - span_start))
            return -1
        nxt = data[j + 1]
        if nxt == 0x00:
            cursor = j + 2
            continue
        if 0xD0 <= nxt <= 0xD7:
            if j > span_start:
                entropy.append((span_start, j - span_start))
            restarts.append(j)
            cursor = span_start = j + 2
            continue
        if j > span_start:
            entropy.append((span_start, j - span_start))
        scans.append((scan_start, j))
        return j


def extract_trailing_payload(segmap: SegmentMap, data: bytes) -> bytes | None:
    if segmap.trailing_payload is None:
        return None
    off, n = segmap.trailing_payload
    return bytes(data[off:off + n])


# ---------------------------------------------------------------------------
# Metadata strings

class MetadataSource(enum.Enum):
    EXIF_TAG = "EXIF_tag"
    COM_SEGMENT = "COM_segment"
    APPN_RAW = "APPn_raw"


@dataclass(frozen=True)
class MetadataString:
    source: MetadataSource
    tag_name: str
    value: bytes
    offset: int


EXIF_TAG_NAMES = {
    0x010D: "DocumentName",
    0x010E: "ImageDescription",
    0x010F: "Make",
    0x0110: "Model",
    0x0131: "Software",
    0x0132: "DateTime",
    0x013B: "Artist",
    0x013C: "HostComputer",
    0x8298: "Copyright",
    0x9000: "ExifVersion",
    0x9003: "DateTimeOriginal",
    0x9004: "DateTimeDigitized",
    0x927C: "MakerNote",
    0x9286: "UserComment",
    0xA420: "ImageUniqueID",
    0xA430: "CameraOwnerName",
    0xA431: "BodySerialNumber",
}

_EXIF_IFD_POINTER = 0x8769
_TIFF_TYPE_SIZES = {1: 1, 2: 1, 3: 2, 4: 4, 5: 8, 6: 1, 7: 1, 8: 2, 9: 4, 10: 8, 11: 4, 12: 8}
_TEXT_TYPES = (1, 2, 7)


class _BadTiff(Exception):
    pass


def _parse_exif(data: bytes, tiff: int, end: int) -> list[MetadataString]:
    """Text-bearing tags of IFD0 and the Exif sub-IFD; offsets are absolute."""
    if end - tiff < 8:
        raise _BadTiff("short TIFF header")
    order = data[tiff:tiff + 2]
    if order == b"II":
        fmt = "<"
    elif order == b"MM":
        fmt = ">"
    else:
        raise _BadTiff("bad byte order")
    if struct.unpack_from(fmt + "H", data, tiff + 2)[0] != 42:
        raise _BadTiff("bad TIFF magic")

    found: list[MetadataString] = []

    def read_ifd(rel: int) -> int | None:
        at = tiff + rel
        if rel < 8 or at + 2 > end:
            raise _BadTiff("IFD offset out of range")
        count = struct.unpack_from(fmt + "H", data, at)[0]
        if at + 2 + 12 * count > end:
            raise _BadTiff("IFD entries out of range")
        exif_ifd = None
        for i in range(count):
            entry = at + 2 + 12 * i
            tag, typ, cnt = struct.unpack_from(fmt + "HHI", data, entry)
            size = _TIFF_TYPE_SIZES.get(typ)
            if size is None:
                continue
            nbytes = size * cnt
            if nbytes <= 4:
                voff = entry + 8
            else:
                voff = tiff + struct.unpack_from(fmt + "I", data, entry + 8)[0]
            if voff + nbytes > end:
                raise _BadTiff(f"tag 0x{tag:04X} value out of range")
            if tag == _EXIF_IFD_POINTER and typ in (4, 13) and cnt == 1:
                exif_ifd = struct.unpack_from(fmt + "I", data, entry + 8)[0]
            elif typ in _TEXT_TYPES:
                value = data[voff:voff + nbytes]
                if typ == 2:
                    value = value.rstrip(b"\x00")
                name = EXIF_TAG_NAMES.get(tag, f"0x{tag:04X}")
                found.append(MetadataString(MetadataSource.EXIF_TAG, name, value, voff))
        return exif_ifd

    ifd0 = struct.unpack_from(fmt + "I", data, tiff + 4)[0]
    sub = read_ifd(ifd0)
    if sub is not None:
        read_ifd(sub)
    return found


def _is_canonical_jfif(payload: bytes) -> bool:
    # APP0 "JFIF\0" header with no thumbnail carries no free-form data.
    return len(payload) == 14 and payload[:5] == b"JFIF\x00" and payload[12:14] == b"\x00\x00"


def extract_metadata_strings(segmap: SegmentMap, data: bytes) -> list[MetadataString]:
    data = bytes(data)
    found: list[MetadataString] = []
    for seg in segmap.segments:
        kind = seg.marker.kind
        off, n = seg.payload_span
        payload = data[off:off + n]
        if kind is MarkerKind.COM:
            found.append(MetadataString(MetadataSource.COM_SEGMENT, "COM", payload, off))
        elif kind is MarkerKind.APP:
            if seg.marker.code == 0xE0 and _is_canonical_jfif(payload):
                continue
            if seg.marker.code == 0xE1 and payload[:6] == b"Exif\x00\x00":
                try:
                    found.extend(_parse_exif(data, off + 6, off + n))
                    continue
                except (_BadTiff, struct.error):
                    pass
            found.append(MetadataString(MetadataSource.APPN_RAW, seg.marker.name, payload, off))
    return found


# ---------------------------------------------------------------------------
# Validity gate

class CorruptReason(enum.Enum):
    PIXEL_COUNT_OUT_OF_RANGE = "pixel_count_out_of_range"
    UNPARSEABLE_STRUCTURE = "unparseable_structure"
    UNDECODABLE_PIXELS = "undecodable_pixels"
    UNSUPPORTED_CODING = "unsupported_coding"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class ValidityVerdict:
    reasons: tuple[CorruptReason, ...] = field(default_factory=tuple)

    @property
    def status(self) -> str:
        return "corrupt" if self.reasons else "valid"

    @property
    def valid(self) -> bool:
        return not self.reasons

    def with_reason(self, reason: CorruptReason) -> "ValidityVerdict":
        if reason in self.reasons:
            return self
        return replace(self, reasons=self.reasons + (reason,))


def validate(segmap: SegmentMap, max_pixels: int = MAX_PIXELS) -> ValidityVerdict:
    reasons = []
    if segmap.error is not None or segmap.sof_code is None or not segmap.scan_extents:
        reasons.append(CorruptReason.UNPARSEABLE_STRUCTURE)
    if not 1 <= segmap.pixel_count <= max_pixels:
        reasons.append(CorruptReason.PIXEL_COUNT_OUT_OF_RANGE)
    if segmap.sof_code is not None and (
        segmap.sof_code not in SUPPORTED_SOF
        or segmap.precision != 8
        or segmap.component_count not in (1, 3)
    ):
        reasons.append(CorruptReason.UNSUPPORTED_CODING)
    return ValidityVerdict(tuple(reasons))


def scan_and_validate(data: bytes, max_pixels: int = MAX_PIXELS) -> tuple[SegmentMap, ValidityVerdict]:
    """Never raises on hostile bytes: a failed scan yields its partial map."""
    try:
        segmap = scan_segments(data)
    except MalformedStructure as exc:
        segmap = exc.partial
    return segmap, validate(segmap, max_pixels)
