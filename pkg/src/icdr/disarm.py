"""The image content disarm and reconstruction pipeline.

Input bytes are never trusted: they are structurally scanned and validated,
decoded to an RGB raster, and every output is built from that raster alone.
The optional steps (resize cycle, filter stack, lossless transcode) then run
in a fixed order, and a final baseline JPEG encode produces the output.

Lossless PNG files are also accepted as input, so pixel-domain attack
carriers (LSB, MSB, anti-resize) can be fed through the same pipeline.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from .codecs import (
    CorruptStream, EncodeParams, JpegError, PixelLimitExceeded, PngError, UnsupportedCoding,
    decode_coefficients, jpeg_encode, planes_to_raster, png_decode, png_encode,
)
from .codecs.png import SIGNATURE as PNG_SIGNATURE, png_layout
from .codecs.tables import LUMA_QUANT, scaled_quant_table
from .jpeg_structure import (
    CorruptReason, ValidityVerdict, extract_metadata_strings, scan_and_validate, scan_segments,
)
from .metrics import QualityScores, format_psnr, quality
from .raster import MAX_PIXELS, Raster
from .raster_ops import detox_lut, detox_transfer, gaussian_blur, resize_cycle, sharpen

STEPS = ("rebuild", "resize", "filter", "transcode")
# Marks report errors that came from an unexpected exception, not a verdict.
INTERNAL_ERROR_PREFIX = "internal: "
_PNG_KEEP = {b"IHDR", b"IDAT", b"IEND"}


@dataclass(frozen=True)
class PipelineConfig:
    resize_scale: float = 0.97
    blur_sigma: float = 1.0
    blur_radius: int = 2
    jpeg_quality: int = 90
    steps: tuple[str, ...] = STEPS
    detox_gamma: float = 0.97
    detox_w: float = 1.0
    max_pixels: int = MAX_PIXELS
    timeout: float = 10.0
    # "auto": 4:2:0 when the input was chroma-subsampled, else 4:4:4.
    subsampling: str = "auto"

    def __post_init__(self):
        steps = tuple(self.steps)
        unknown = set(steps) - set(STEPS)
        if unknown:
            raise ValueError(f"unknown steps: {', '.join(sorted(unknown))}")
        if not steps:
            raise ValueError("steps must not be empty")
        # Rebuild is always implied; the remaining steps run in canonical order.
        object.__setattr__(self, "steps", tuple(s for s in STEPS if s == "rebuild" or s in steps))
        if not 0.0 < self.resize_scale < 1.0:
            raise ValueError(f"resize_scale must be in (0, 1), got {self.resize_scale}")
        if self.blur_sigma <= 0 or self.blur_radius < 1:
            raise ValueError("blur_sigma must be > 0 and blur_radius >= 1")
        if not 1 <= self.jpeg_quality <= 100:
            raise ValueError(f"jpeg_quality must be in 1..100, got {self.jpeg_quality}")
        if self.max_pixels < 1:
            raise ValueError("max_pixels must be positive")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.subsampling not in ("auto", "444", "420"):
            raise ValueError(f"subsampling must be auto, 444 or 420, got {self.subsampling!r}")
        detox_lut(self.detox_gamma, self.detox_w)

    def with_steps(self, steps: Iterable[str]) -> "PipelineConfig":
        return replace(self, steps=tuple(steps))


@dataclass
class DisarmReport:
    verdict: str
    corrupt_reasons: tuple[str, ...] = ()
    input_format: str = "unknown"
    input_size: int = 0
    width: int = 0
    height: int = 0
    trailing_payload_bytes: int = 0
    metadata_strings: int = 0
    quality: QualityScores | None = None
    timings: dict[str, float] = field(default_factory=dict)
    output_size: int = 0
    output_quality: int | None = None
    error: str | None = None

    @property
    def disarmed(self) -> bool:
        return self.verdict == "disarmed"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "corrupt_reasons": list(self.corrupt_reasons),
            "input_format": self.input_format,
            "input_size": self.input_size,
            "width": self.width,
            "height": self.height,
            "removed": {
                "trailing_payload_bytes": self.trailing_payload_bytes,
                "metadata_strings": self.metadata_strings,
            },
            "quality": None if self.quality is None else self.quality.to_dict(),
            "timings_ms": {k: round(v * 1000.0, 3) for k, v in self.timings.items()},
            "output_size": self.output_size,
            "output_quality": self.output_quality,
            "error": self.error,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    CSV_FIELDS = ("verdict", "corrupt_reasons", "input_format", "input_size", "width", "height",
                  "trailing_payload_bytes", "metadata_strings", "psnr", "ssim", "uqi",
                  "output_size", "duration_ms")

    def csv_row(self) -> dict:
        q = self.quality
        return {
            "verdict": self.verdict,
            "corrupt_reasons": ";".join(self.corrupt_reasons),
            "input_format": self.input_format,
            "input_size": self.input_size,
            "width": self.width,
            "height": self.height,
            "trailing_payload_bytes": self.trailing_payload_bytes,
            "metadata_strings": self.metadata_strings,
            "psnr": "" if q is None else format_psnr(q.psnr),
            "ssim": "" if q is None else repr(q.ssim),
            "uqi": "" if q is None else repr(q.uqi),
            "output_size": self.output_size,
            "duration_ms": int(round(sum(self.timings.values()) * 1000.0)),
        }

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.CSV_FIELDS, lineterminator="\r\n")
        if header:
            writer.writeheader()
        writer.writerow(self.csv_row())
        return buf.getvalue()


class _Corrupt(Exception):
    def __init__(self, reasons: Iterable[CorruptReason], detail: str | None = None):
        super().__init__(detail or "")
        self.reasons = tuple(reasons)
        self.detail = detail


class _Clock:
    """Per-stage timings plus a cooperative deadline checked between stages."""

    def __init__(self, timeout: float):
        self.start = time.monotonic()
        self.deadline = self.start + timeout
        self.timings: dict[str, float] = {}

    def run(self, name: str, fn: Callable, *args):
        t0 = time.monotonic()
        result = fn(*args)
        t1 = time.monotonic()
        self.timings[name] = self.timings.get(name, 0.0) + (t1 - t0)
        if t1 > self.deadline:
            raise _Corrupt([CorruptReason.TIMEOUT], f"exceeded the time budget during {name}")
        return result


@dataclass(frozen=True)
class _Ingested:
    raster: Raster
    input_format: str
    subsampled: bool
    luma_quant: np.ndarray | None
    trailing: int
    metadata: int


def _ingest_jpeg(data: bytes, cfg: PipelineConfig) -> _Ingested:
    segmap, verdict = scan_and_validate(data, cfg.max_pixels)
    if not verdict.valid:
        raise _Corrupt(verdict.reasons, segmap.error)
    try:
        planes = decode_coefficients(data)
        raster = planes_to_raster(planes)
    except UnsupportedCoding as exc:
        raise _Corrupt([CorruptReason.UNSUPPORTED_CODING], str(exc)) from exc
    except (CorruptStream, JpegError) as exc:
        raise _Corrupt([CorruptReason.UNDECODABLE_PIXELS], str(exc)) from exc
    trailing = segmap.trailing_payload[1] if segmap.trailing_payload else 0
    metadata = len(extract_metadata_strings(segmap, data))
    luma = planes.quant_tables.get(planes.components[0].quant_index)
    return _Ingested(raster, "jpeg", planes.subsampled, luma, trailing, metadata)


def _ingest_png(data: bytes, cfg: PipelineConfig) -> _Ingested:
    try:
        raster = png_decode(data, max_pixels=cfg.max_pixels)
    except PixelLimitExceeded as exc:
        raise _Corrupt([CorruptReason.PIXEL_COUNT_OUT_OF_RANGE], str(exc)) from exc
    except PngError as exc:
        raise _Corrupt([CorruptReason.UNDECODABLE_PIXELS], str(exc)) from exc
    kinds, end = png_layout(data)
    extra = sum(1 for k in kinds if k not in _PNG_KEEP)
    return _Ingested(raster, "png", False, None, len(data) - end, extra)


def _ingest(data: bytes, cfg: PipelineConfig) -> _Ingested:
    if data[:8] == PNG_SIGNATURE:
        return _ingest_png(data, cfg)
    return _ingest_jpeg(data, cfg)


def output_quality(cfg_quality: int, input_luma: np.ndarray | None) -> int:
    """Quality for the final encode, forcing a full requantization.

    When the input was quantized with exactly the table the configured
    quality would produce, decoding and re-encoding can reproduce most
    coefficients unchanged. In that case the nearest lower quality whose
    luma table differs in every position is used instead.
    """
    if input_luma is None:
        return cfg_quality
    if not np.array_equal(input_luma, scaled_quant_table(LUMA_QUANT, cfg_quality)):
        return cfg_quality
    for q in range(cfg_quality - 1, 0, -1):
        if np.all(scaled_quant_table(LUMA_QUANT, q) != input_luma):
            return q
    return cfg_quality


def transcode_roundtrip(r: Raster) -> Raster:
    """Pass pixels through a PNG file; lossless, and nothing but pixels survive."""
    return png_decode(png_encode(r))


def filter_stack(r: Raster, cfg: PipelineConfig = PipelineConfig()) -> Raster:
    return sharpen(gaussian_blur(r, cfg.blur_sigma, cfg.blur_radius))


def disarm_raster(r: Raster, cfg: PipelineConfig = PipelineConfig(), clock: _Clock | None = None) -> Raster:
    """Apply the configured pixel-domain steps, without the final encode."""
    clock = clock or _Clock(math.inf)
    if "resize" in cfg.steps:
        r = clock.run("resize", resize_cycle, r, cfg.resize_scale)
    if "filter" in cfg.steps:
        r = clock.run("filter", filter_stack, r, cfg)
    if "transcode" in cfg.steps:
        r = clock.run("transcode", transcode_roundtrip, r)
    return r


def _verify_clean(out: bytes) -> None:
    segmap = scan_segments(out)
    if segmap.trailing_payload is not None or extract_metadata_strings(segmap, out):
        raise AssertionError("encoder produced a file that fails the cleanliness check")
    if len(segmap.find("SOI")) != 1 or segmap.sof_code is None:
        raise AssertionError("encoder produced an unexpected segment layout")


def _run(data: bytes, cfg: PipelineConfig, transform: Callable[[Raster, _Clock], Raster],
         compare: bool, rewrites_pixels: bool) -> tuple[bytes | None, DisarmReport]:
    data = bytes(data)
    report = DisarmReport(verdict="corrupt", input_size=len(data))
    clock = _Clock(cfg.timeout)
    try:
        src = clock.run("rebuild", _ingest, data, cfg)
        report.input_format = src.input_format
        report.width, report.height = src.raster.size
        report.trailing_payload_bytes = src.trailing
        report.metadata_strings = src.metadata
        r = transform(src.raster, clock)
        q = cfg.jpeg_quality if rewrites_pixels else output_quality(cfg.jpeg_quality, src.luma_quant)
        sub = cfg.subsampling
        if sub == "auto":
            sub = "420" if src.subsampled else "444"
        params = EncodeParams(q, sub)
        out = clock.run("encode", jpeg_encode, r, params)
        _verify_clean(out)
        if compare:
            decoded = planes_to_raster(decode_coefficients(out))
            report.quality = clock.run("quality", quality, src.raster, decoded)
    except _Corrupt as exc:
        report.corrupt_reasons = tuple(r.value for r in exc.reasons)
        report.error = exc.detail
        report.timings = clock.timings
        return None, report
    except Exception as exc:  # noqa: BLE001
        # Hostile input must always end in a verdict, even on an unforeseen failure.
        report.corrupt_reasons = (CorruptReason.UNDECODABLE_PIXELS.value,)
        report.error = f"{INTERNAL_ERROR_PREFIX}{type(exc).__name__}: {exc}"
        report.timings = clock.timings
        return None, report
    report.verdict = "disarmed"
    report.output_size = len(out)
    report.output_quality = q
    report.timings = clock.timings
    return out, report


def disarm_bytes(data: bytes, cfg: PipelineConfig = PipelineConfig(),
                 compare: bool = True) -> tuple[bytes | None, DisarmReport]:
    """Full pipeline; corrupt input yields ``(None, report)`` and never raises."""
    # Resize and filter rewrite every pixel, so coefficients cannot carry over
    # even when the output tables match the input's.
    rewrites = bool({"resize", "filter"} & set(cfg.steps))
    return _run(data, cfg, lambda r, clock: disarm_raster(r, cfg, clock), compare, rewrites)


def run_step_subset(data: bytes, steps: Iterable[str], cfg: PipelineConfig = PipelineConfig(),
                    compare: bool = True) -> tuple[bytes | None, DisarmReport]:
    return disarm_bytes(data, cfg.with_steps(steps), compare)


def detox_bytes(data: bytes, cfg: PipelineConfig = PipelineConfig(),
                compare: bool = True) -> tuple[bytes | None, DisarmReport]:
    """Baseline sanitizer: power-curve transfer, then the same final encode."""
    def transform(r: Raster, clock: _Clock) -> Raster:
        return clock.run("detox", detox_transfer, r, cfg.detox_gamma, cfg.detox_w)
    return _run(data, cfg, transform, compare, False)


def corrupt_verdict(report: DisarmReport) -> ValidityVerdict:
    return ValidityVerdict(tuple(CorruptReason(r) for r in report.corrupt_reasons))
