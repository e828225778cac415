"""``icdr`` command line: inspect, disarm, stego, quality, batch, gen-corpus, sweep.

Exit codes: 0 success, 1 every batch file errored, 2 usage or I/O error,
3 corrupt input, 4 hidden message destroyed, 5 carrier capacity exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .codecs import JpegError, PngError
from .config import ConfigError, RunConfig, load_config, parse_steps
from .corpus import KINDS, benign_corpus, infect, THREATS, CorpusItem, write_corpus
from .disarm import STEPS, detox_bytes, disarm_bytes
from .harness import (
    ATTACKS, embed, extract, filter_sweep, list_images, load_raster, resize_sweep,
    rows_to_csv, run_batch, summarize, sweep_to_csv,
)
from .jpeg_structure import extract_metadata_strings, scan_and_validate
from .metrics import MetricError, format_psnr, quality
from .stego import CapacityExceeded

EXIT_OK = 0
EXIT_ALL_FAILED = 1
EXIT_IO = 2
EXIT_CORRUPT = 3
EXIT_DESTROYED = 4
EXIT_CAPACITY = 5


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from exc


def _write(path: str, data: bytes | str) -> None:
    try:
        p = Path(path)
        if p.parent != Path("."):
            p.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(data, str):
            p.write_text(data, encoding="utf-8", newline="")
        else:
            p.write_bytes(data)
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}") from exc


def _config(args) -> RunConfig:
    try:
        cfg = load_config(getattr(args, "config", None))
    except (ConfigError, OSError) as exc:
        raise _Fail(EXIT_IO, f"config: {exc}") from exc
    steps = getattr(args, "steps", None)
    if steps:
        try:
            pipeline = cfg.pipeline.with_steps(parse_steps(steps))
        except ValueError as exc:
            raise _Fail(EXIT_IO, f"--steps: {exc}") from exc
        cfg = RunConfig(pipeline, cfg.jobs, cfg.seed, cfg.report_path, cfg.timeout_ms)
    return cfg


# ---------------------------------------------------------------------------

def cmd_inspect(args) -> int:
    data = _read(args.file)
    segmap, verdict = scan_and_validate(data)
    strings = extract_metadata_strings(segmap, data) if segmap.segments else []
    trailing = segmap.trailing_payload
    if args.json:
        doc = {
            "file": args.file,
            "verdict": verdict.status,
            "reasons": [r.value for r in verdict.reasons],
            "structure": segmap.to_dict(),
            "metadata_strings": [
                {"source": s.source.value, "tag": s.tag_name, "offset": s.offset,
                 "value": s.value.decode("latin-1")}
                for s in strings
            ],
            "trailing_payload_bytes": trailing[1] if trailing else 0,
        }
        print(json.dumps(doc, indent=2))
    else:
        print(f"file: {args.file} ({len(data)} bytes)")
        print(f"{'offset':>10}  {'marker':<6} {'length':>7}")
        for seg in segmap.segments:
            length = "-" if seg.declared_length is None else str(seg.declared_length)
            print(f"{seg.marker.offset:>10}  {seg.marker.name:<6} {length:>7}")
        if segmap.declared_width:
            print(f"dimensions: {segmap.declared_width}x{segmap.declared_height}, "
                  f"{segmap.component_count} components")
        for s in strings:
            text = s.value.decode("latin-1")
            if len(text) > 72:
                text = text[:69] + "..."
            print(f"metadata: {s.source.value} {s.tag_name} @{s.offset}: {text!r}")
        if trailing:
            print(f"trailing payload: {trailing[1]} bytes at offset {trailing[0]}")
        if segmap.error:
            print(f"error: {segmap.error}")
        reasons = ", ".join(r.value for r in verdict.reasons)
        print(f"verdict: {verdict.status}" + (f" ({reasons})" if reasons else ""))
    return EXIT_OK if verdict.valid else EXIT_CORRUPT


def cmd_disarm(args) -> int:
    cfg = _config(args)
    data = _read(args.input)
    run = detox_bytes if args.detox else disarm_bytes
    out, report = run(data, cfg.pipeline)
    if out is not None:
        _write(args.out, out)
    if args.json:
        print(report.to_json())
    else:
        print(report.to_csv(header=True), end="")
    return EXIT_OK if out is not None else EXIT_CORRUPT


def _message(args) -> bytes:
    if args.message_file:
        return _read(args.message_file)
    if args.message is None:
        raise _Fail(EXIT_IO, "embed needs --message or --message-file")
    return args.message.encode("utf-8")


def cmd_stego(args) -> int:
    if args.action == "embed":
        if args.tool != "antiresize" and not args.input:
            raise _Fail(EXIT_IO, f"{args.tool} embedding needs an input image")
        if not args.out:
            raise _Fail(EXIT_IO, "embed needs --out")
        data = _read(args.input) if args.tool != "antiresize" else None
        try:
            carrier = embed(args.tool, data, _message(args))
        except CapacityExceeded as exc:
            print(f"capacity exceeded: {exc}", file=sys.stderr)
            return EXIT_CAPACITY
        except (JpegError, PngError) as exc:
            raise _Fail(EXIT_CORRUPT, f"cannot decode {args.input}: {exc}") from exc
        _write(args.out, carrier)
        return EXIT_OK
    if not args.input:
        raise _Fail(EXIT_IO, "extract needs an input image")
    message = extract(args.tool, _read(args.input))
    if message is None:
        print("DESTROYED")
        return EXIT_DESTROYED
    if args.out:
        _write(args.out, message)
    else:
        sys.stdout.buffer.write(message + b"\n")
        sys.stdout.flush()
    return EXIT_OK


def cmd_quality(args) -> int:
    try:
        a = load_raster(_read(args.a))
        b = load_raster(_read(args.b))
        scores = quality(a, b)
    except (JpegError, PngError, MetricError) as exc:
        raise _Fail(EXIT_IO, str(exc)) from exc
    print(f"{format_psnr(scores.psnr)},{scores.ssim!r},{scores.uqi!r}")
    return EXIT_OK


def cmd_batch(args) -> int:
    cfg = _config(args)
    directory = Path(args.dir)
    if not directory.is_dir():
        raise _Fail(EXIT_IO, f"not a directory: {directory}")
    paths = list_images(directory)
    if not paths:
        raise _Fail(EXIT_IO, f"no images in {directory}")
    attack = None if args.attack == "none" else args.attack
    jobs = args.jobs if args.jobs is not None else cfg.jobs
    seed = args.seed if args.seed is not None else cfg.seed
    if jobs < 1:
        raise _Fail(EXIT_IO, "--jobs must be >= 1")
    out_dir = None
    if args.out:
        out_dir = Path(args.out)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise _Fail(EXIT_IO, f"cannot create {out_dir}: {exc}") from exc
    rows = run_batch(paths, cfg.pipeline, attack, args.detox, seed, jobs, out_dir,
                     timings=not args.no_timings)
    report = args.report or cfg.report_path
    text = rows_to_csv(rows)
    if report:
        _write(report, text)
    else:
        sys.stdout.write(text)
    summary = summarize(rows)
    print(summary.line(), file=sys.stderr if not report else sys.stdout)
    return EXIT_ALL_FAILED if summary.errors == summary.files else EXIT_OK


def cmd_gen_corpus(args) -> int:
    if args.count < 1:
        raise _Fail(EXIT_IO, "--count must be >= 1")
    kinds = tuple(k.strip() for k in args.kinds.split(",") if k.strip())
    bad = [k for k in kinds if k not in KINDS]
    if bad or not kinds:
        raise _Fail(EXIT_IO, f"--kinds must be drawn from {', '.join(KINDS)}")
    side_range = (args.min_side, args.max_side)
    if not 1 <= args.min_side <= args.max_side:
        raise _Fail(EXIT_IO, "need 1 <= --min-side <= --max-side")
    items = list(benign_corpus(args.count, args.seed, kinds, side_range))
    infected = []
    n_infected = args.count if args.infected is None else args.infected
    for i in range(n_infected):
        base = items[i % len(items)]
        threat = THREATS[i % len(THREATS)]
        data, markers, appended = infect(base.data, threat, args.seed * 1_000_003 + i)
        name = f"infected_{threat}_{args.seed}_{i:05d}.jpg"
        infected.append(CorpusItem(name, data, base.kind, threat, markers, appended))
    try:
        write_corpus(items + infected, Path(args.out))
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot write corpus: {exc}") from exc
    print(f"wrote {len(items)} images and {len(infected)} infected variants to {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    directory = Path(args.corpus)
    if not directory.is_dir():
        raise _Fail(EXIT_IO, f"not a directory: {directory}")
    rasters = []
    for p in list_images(directory)[:args.limit]:
        try:
            rasters.append(load_raster(p.read_bytes()))
        except (OSError, JpegError, PngError):
            continue
    if not rasters:
        raise _Fail(EXIT_IO, f"no decodable images in {directory}")
    if args.experiment == "resize":
        rows = resize_sweep(rasters, seed=args.seed)
    else:
        rows = filter_sweep(rasters, args.max_depth)
    text = sweep_to_csv(rows)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="icdr", description="Image content disarm and reconstruction.")
    parser.add_argument("--version", action="version", version=f"icdr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="show JPEG structure, metadata strings and validity")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_inspect)

    steps_help = f"comma-separated subset of {','.join(STEPS[1:])} (rebuild is implied)"
    p = sub.add_parser("disarm", help="rebuild one image from its pixels")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="key = value config file (default: $ICDR_CONFIG)")
    p.add_argument("--steps", help=steps_help)
    p.add_argument("--detox", action="store_true", help="run the Detox baseline instead")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.set_defaults(func=cmd_disarm)

    p = sub.add_parser("stego", help="embed or extract a hidden message")
    p.add_argument("action", choices=("embed", "extract"))
    p.add_argument("input", nargs="?", help="carrier image (not used by antiresize embed)")
    p.add_argument("--tool", choices=ATTACKS, required=True)
    p.add_argument("--message")
    p.add_argument("--message-file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stego)

    p = sub.add_parser("quality", help="PSNR, SSIM and UQI of B against A")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_quality)

    p = sub.add_parser("batch", help="attack, disarm and measure every image in a directory")
    p.add_argument("dir")
    p.add_argument("--out", help="directory for disarmed files")
    p.add_argument("--report", help="CSV report path (default: stdout)")
    p.add_argument("--attack", choices=ATTACKS + ("none",), default="none")
    p.add_argument("--steps", help=steps_help)
    p.add_argument("--detox", action="store_true")
    p.add_argument("--jobs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--no-timings", action="store_true",
                   help="write duration_ms as 0 so reports are byte-reproducible")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("gen-corpus", help="write a deterministic synthetic corpus")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kinds", default=",".join(KINDS))
    p.add_argument("--infected", type=int, help="number of infected variants (default: --count)")
    p.add_argument("--min-side", type=int, default=64)
    p.add_argument("--max-side", type=int, default=1024)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("sweep", help="tuning experiments over a corpus")
    p.add_argument("--experiment", choices=("resize", "filters"), required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-depth", type=int, default=4)
    p.add_argument("--limit", type=int, default=100, help="use at most this many images")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_IO if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"icdr: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
