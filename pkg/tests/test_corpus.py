import numpy as np
import pytest

from icdr.codecs import decode_coefficients, jpeg_decode
from icdr.corpus import (
    KINDS, THREATS, benign_corpus, com_segment, exif_app1, infect, infected_corpus,
    synth_raster, write_corpus,
)
from icdr.jpeg_structure import extract_metadata_strings, scan_and_validate, scan_segments
from icdr.stego import dct_capacity


def test_deterministic():
    a = [item.data for item in benign_corpus(6, seed=7, side_range=(64, 128))]
    b = [item.data for item in benign_corpus(6, seed=7, side_range=(64, 128))]
    assert a == b
    c = [item.data for item in benign_corpus(6, seed=8, side_range=(64, 128))]
    assert a != c


def test_sizes_and_kinds():
    items = list(benign_corpus(12, seed=1, side_range=(64, 1024)))
    assert [i.kind for i in items[:3]] == list(KINDS)
    for item in items:
        r = jpeg_decode(item.data)
        assert 64 <= r.width <= 1024 and 64 <= r.height <= 1024
    with pytest.raises(ValueError):
        synth_raster(0, "cartoons")


def test_dct_capacity_is_ample():
    caps = [dct_capacity(decode_coefficients(i.data))
            for i in benign_corpus(9, seed=3, side_range=(64, 1024))]
    assert np.mean(caps) > 4096


def test_infected_variants_are_flagged():
    for item in infected_corpus(8, seed=2):
        segmap, verdict = scan_and_validate(item.data)
        assert verdict.valid
        strings = extract_metadata_strings(segmap, item.data)
        if item.threat in ("exif", "com", "mixed"):
            assert strings
        if item.threat in ("append", "mixed"):
            assert segmap.trailing_payload[1] == item.appended
        for marker in item.markers:
            assert marker in item.data


def test_threat_writers():
    seg = com_segment(b"abc")
    assert seg == b"\xff\xfe\x00\x05abc"
    app1 = exif_app1({0x013B: b"me"})
    assert app1[:2] == b"\xff\xe1" and app1[4:10] == b"Exif\x00\x00"
    with pytest.raises(ValueError):
        infect(b"\xff\xd8\xff\xd9", "worm", 0)


def test_append_sizes_span_range():
    base = next(benign_corpus(1, side_range=(64, 64))).data
    sizes = [infect(base, "append", s)[2] for s in range(200)]
    assert min(sizes) >= 16 and max(sizes) <= 1 << 20
    assert min(sizes) < 256 and max(sizes) > 65536


def test_write_corpus(tmp_path):
    items = list(benign_corpus(2, side_range=(64, 80)))
    paths = write_corpus(items, tmp_path / "c")
    assert [p.read_bytes() for p in paths] == [i.data for i in items]
    assert set(THREATS) == {"append", "exif", "com", "mixed"}
    assert scan_segments(paths[0].read_bytes()).trailing_payload is None
