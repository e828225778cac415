"""Experiment harness: attack, disarm, re-extract and measure, one row per file.

Each file is handled by a pure function of its bytes and the run settings, so
batches can be spread over worker processes and still produce the same rows.
"""

from __future__ import annotations

import csv
import io
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .codecs import (
    decode_coefficients, encode_coefficients, jpeg_decode, png_decode, png_encode,
)
from .codecs.png import SIGNATURE as PNG_SIGNATURE
from .disarm import PipelineConfig, detox_bytes, disarm_bytes
from .metrics import format_psnr, quality
from .raster import Raster
from .raster_ops import apply_stack, filter_stacks, resize_cycle
from .stego import (
    CapacityExceeded, HEADER_BITS, antiresize_embed, antiresize_extract, capacity_bits,
    dct_capacity, dct_embed, dct_extract, lsb_embed, lsb_extract, msb_embed, msb_extract,
)

ATTACKS = ("lsb", "msb", "dct", "antiresize")
IMAGE_SUFFIXES = {".jpg", ".jpeg", ".jpe", ".jfif", ".png"}
MAX_MESSAGE = 1024
ANTIRESIZE_BLOCK = 8
ANTIRESIZE_CANVAS = 4000


def load_raster(data: bytes) -> Raster:
    if data[:8] == PNG_SIGNATURE:
        return png_decode(data)
    return jpeg_decode(data)


def attack_capacity(tool: str, data: bytes | None) -> int:
    if tool == "antiresize":
        return 3 * (ANTIRESIZE_CANVAS // ANTIRESIZE_BLOCK) ** 2
    if tool == "dct":
        return dct_capacity(decode_coefficients(data))
    return capacity_bits(load_raster(data))


def attack_message(seed: int, key: str, capacity: int, limit: int = MAX_MESSAGE) -> bytes:
    """Deterministic random message, as long as the carrier allows up to ``limit`` bytes."""
    length = min(limit, (capacity - HEADER_BITS) // 8)
    if length < 1:
        raise CapacityExceeded(HEADER_BITS + 8, capacity)
    rng = np.random.default_rng([seed, zlib.crc32(key.encode("utf-8"))])
    return rng.integers(0, 256, size=length, dtype=np.uint8).tobytes()


def embed(tool: str, data: bytes | None, message: bytes) -> bytes:
    """Carrier file for ``message``: PNG for pixel tools, JPEG for the DCT tool."""
    if tool == "lsb":
        return png_encode(lsb_embed(load_raster(data), message))
    if tool == "msb":
        return png_encode(msb_embed(load_raster(data), message))
    if tool == "dct":
        return encode_coefficients(dct_embed(decode_coefficients(data), message))
    if tool == "antiresize":
        return png_encode(antiresize_embed(message, ANTIRESIZE_BLOCK, ANTIRESIZE_CANVAS))
    raise ValueError(f"unknown attack tool {tool!r}")


def extract(tool: str, data: bytes) -> bytes | None:
    """Recovered message, or None when the file no longer yields one."""
    try:
        if tool == "dct":
            return dct_extract(decode_coefficients(data))
        r = load_raster(data)
    except ValueError:
        return None
    if tool == "lsb":
        return lsb_extract(r)
    if tool == "msb":
        return msb_extract(r)
    if tool == "antiresize":
        return antiresize_extract(r, ANTIRESIZE_BLOCK, ANTIRESIZE_CANVAS)
    raise ValueError(f"unknown attack tool {tool!r}")


@dataclass(frozen=True)
class BatchRow:
    file: str
    status: str
    input_size: int
    output_size: int
    width: int
    height: int
    trailing_payload_bytes: int
    metadata_strings_removed: int
    psnr: str
    ssim: str
    uqi: str
    stego_tool: str
    stego_survived: str
    duration_ms: int


FIELDS = tuple(f.name for f in fields(BatchRow))


def rows_to_csv(rows: Iterable[BatchRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(FIELDS)
    for row in rows:
        writer.writerow(astuple(row))
    return buf.getvalue()


@dataclass(frozen=True)
class BatchTask:
    path: str
    name: str
    pipeline: PipelineConfig
    attack: str | None = None
    detox: bool = False
    seed: int = 0
    out_dir: str | None = None
    timings: bool = True


def process_file(task: BatchTask) -> BatchRow:
    start = time.perf_counter()
    tool = task.attack or "-"
    blank = dict(output_size=0, width=0, height=0, trailing_payload_bytes=0,
                 metadata_strings_removed=0, psnr="", ssim="", uqi="",
                 stego_tool=tool, stego_survived="-")

    def elapsed() -> int:
        return int(round((time.perf_counter() - start) * 1000)) if task.timings else 0

    try:
        data = Path(task.path).read_bytes()
    except OSError:
        return BatchRow(task.name, "error", 0, duration_ms=elapsed(), **blank)
    try:
        reference = None
        subject = data
        message = None
        if task.attack:
            carrier_src = None if task.attack == "antiresize" else data
            capacity = attack_capacity(task.attack, carrier_src)
            message = attack_message(task.seed, task.name, capacity)
            subject = embed(task.attack, carrier_src, message)
            if task.attack == "antiresize":
                # The carrier is a fresh canvas, so it is its own reference.
                reference = load_raster(subject)
        if reference is None:
            reference = load_raster(data)
    except Exception:  # noqa: BLE001
        # Undecodable originals and capacity failures are per-file errors.
        return BatchRow(task.name, "error", len(data), duration_ms=elapsed(), **blank)

    run = detox_bytes if task.detox else disarm_bytes
    out, report = run(subject, task.pipeline, compare=False)
    if out is None:
        row = dict(blank, trailing_payload_bytes=report.trailing_payload_bytes,
                   metadata_strings_removed=report.metadata_strings)
        return BatchRow(task.name, "corrupt", len(data), duration_ms=elapsed(), **row)
    if task.out_dir:
        Path(task.out_dir, Path(task.name).stem + ".icdr.jpg").write_bytes(out)
    scores = quality(reference, jpeg_decode(out))
    survived = "-"
    if task.attack:
        survived = "yes" if extract(task.attack, out) == message else "no"
    return BatchRow(
        task.name, "disarmed", len(data), len(out), report.width, report.height,
        report.trailing_payload_bytes, report.metadata_strings,
        format_psnr(scores.psnr), repr(scores.ssim), repr(scores.uqi),
        tool, survived, elapsed(),
    )


@dataclass(frozen=True)
class BatchSummary:
    files: int
    disarmed: int
    corrupt: int
    errors: int
    attacked: int
    destroyed: int

    @property
    def success_rate(self) -> float | None:
        """Share of attacked files whose message could not be recovered."""
        return self.destroyed / self.attacked if self.attacked else None

    def line(self) -> str:
        rate = "-" if self.success_rate is None else f"{100.0 * self.success_rate:.1f}%"
        return (f"files={self.files} disarmed={self.disarmed} corrupt={self.corrupt} "
                f"error={self.errors} success_rate={rate}")


def summarize(rows: Sequence[BatchRow]) -> BatchSummary:
    attacked = [r for r in rows if r.stego_survived in ("yes", "no")]
    return BatchSummary(
        files=len(rows),
        disarmed=sum(r.status == "disarmed" for r in rows),
        corrupt=sum(r.status == "corrupt" for r in rows),
        errors=sum(r.status == "error" for r in rows),
        attacked=len(attacked),
        destroyed=sum(r.stego_survived == "no" for r in attacked),
    )


def list_images(directory: Path) -> list[Path]:
    return sorted(p for p in Path(directory).iterdir()
                  if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def run_batch(paths: Sequence[Path], pipeline: PipelineConfig = PipelineConfig(),
              attack: str | None = None, detox: bool = False, seed: int = 0,
              jobs: int = 1, out_dir: Path | None = None, timings: bool = True) -> list[BatchRow]:
    """Process every file; rows come back sorted by file name whatever ``jobs`` is."""
    if attack is not None and attack not in ATTACKS:
        raise ValueError(f"unknown attack tool {attack!r}")
    tasks = [BatchTask(str(p), Path(p).name, pipeline, attack, detox, seed,
                       None if out_dir is None else str(out_dir), timings)
             for p in sorted(paths, key=lambda p: Path(p).name)]
    if jobs <= 1 or len(tasks) <= 1:
        rows = [process_file(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(process_file, tasks, chunksize=1))
    return sorted(rows, key=lambda r: r.file)


# ---------------------------------------------------------------------------
# Tuning sweeps

RESIZE_SCALES = (0.99, 0.98, 0.97, 0.96, 0.95)


@dataclass(frozen=True)
class SweepRow:
    setting: str
    uqi: float
    psnr: float
    ssim: float
    destruction_rate: float | None = None


def sweep_to_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(("setting", "uqi", "psnr", "ssim", "destruction_rate"))
    for r in rows:
        rate = "" if r.destruction_rate is None else repr(r.destruction_rate)
        writer.writerow((r.setting, repr(r.uqi), format_psnr(r.psnr), repr(r.ssim), rate))
    return buf.getvalue()


def _mean_scores(pairs) -> tuple[float, float, float]:
    scores = [quality(a, b) for a, b in pairs]
    return (float(np.mean([s.uqi for s in scores])),
            float(np.mean([s.psnr for s in scores])),
            float(np.mean([s.ssim for s in scores])))


def resize_sweep(rasters: Sequence[Raster], scales: Sequence[float] = RESIZE_SCALES,
                 seed: int = 0, message_limit: int = 256) -> list[SweepRow]:
    """Quality of a bare resize cycle per scale, plus its MSB destruction rate."""
    carriers = []
    for i, r in enumerate(rasters):
        msg = attack_message(seed, f"resize-sweep-{i}", capacity_bits(r), message_limit)
        carriers.append((msb_embed(r, msg), msg))
    rows = []
    for scale in scales:
        uqi_, psnr_, ssim_ = _mean_scores((r, resize_cycle(r, scale)) for r in rasters)
        destroyed = sum(msb_extract(resize_cycle(c, scale)) != m for c, m in carriers)
        rows.append(SweepRow(f"{round(scale * 100)}%", uqi_, psnr_, ssim_, destroyed / len(carriers)))
    return rows


def filter_sweep(rasters: Sequence[Raster], max_depth: int = 4) -> list[SweepRow]:
    """Every ordered filter stack, best PSNR first (ties keep generation order)."""
    rows = []
    for stack in filter_stacks(max_depth):
        uqi_, psnr_, ssim_ = _mean_scores((r, apply_stack(r, stack)) for r in rasters)
        rows.append(SweepRow(", ".join(stack), uqi_, psnr_, ssim_))
    return sorted(rows, key=lambda r: -r.psnr)
