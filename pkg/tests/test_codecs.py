import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, strategies as st

from icdr.codecs import (
    BadChecksum, BadSignature, EncodeParams, PixelLimitExceeded, UnsupportedCoding,
    decode_coefficients, encode_coefficients, jpeg_decode, jpeg_encode, png_decode, png_encode,
)
from icdr.codecs.jpeg import fdct, idct
from icdr.codecs.png import png_chunk_types
from icdr.codecs.tables import LUMA_QUANT, scaled_quant_table
from icdr.jpeg_structure import extract_metadata_strings, scan_segments
from icdr.metrics import psnr
from icdr.raster import Raster

from helpers import jpeg_of, pillow_jpeg, pillow_png, pillow_pixels, random_raster, smooth_raster


def test_flat_gray_survives():
    out = jpeg_decode(jpeg_of(Raster.filled(64, 64, (128, 128, 128))))
    assert np.abs(out.pixels.astype(int) - 128).max() <= 1


def test_white_pixel():
    out = jpeg_decode(jpeg_of(Raster.filled(1, 1, (255, 255, 255))))
    assert out.size == (1, 1)
    assert np.abs(out.pixels.astype(int) - 255).max() <= 1


def test_random_image_q95_psnr():
    r = smooth_raster(5, 120, 90)
    assert psnr(r, jpeg_decode(jpeg_of(r, 95))) > 30


def test_quality_50_writes_base_tables():
    data = jpeg_of(random_raster(0, 8, 8), 50)
    dqt = scan_segments(data).find("DQT")[0].payload(data)
    # First luma entries in zig-zag order.
    assert list(dqt[1:9]) == [16, 11, 12, 14, 12, 10, 16, 14]
    assert np.array_equal(scaled_quant_table(LUMA_QUANT, 50), LUMA_QUANT)


def test_quant_scaling_is_ijg():
    t = scaled_quant_table(LUMA_QUANT, 90)
    expected = np.clip((LUMA_QUANT.astype(int) * 20 + 50) // 100, 1, 255)
    assert np.array_equal(t, expected)
    t = scaled_quant_table(LUMA_QUANT, 10)
    expected = np.clip((LUMA_QUANT.astype(int) * 500 + 50) // 100, 1, 255)
    assert np.array_equal(t, expected)


def test_encoder_emits_no_metadata():
    data = jpeg_of(random_raster(3, 17, 5))
    m = scan_segments(data)
    assert m.trailing_payload is None and extract_metadata_strings(m, data) == []


def test_progressive_unsupported():
    data = pillow_jpeg(smooth_raster(1, 40, 40), progressive=True)
    with pytest.raises(UnsupportedCoding):
        jpeg_decode(data)


@pytest.mark.parametrize("subsampling,tol", [(0, 3), (2, 12)])
def test_decodes_pillow_files(subsampling, tol):
    r = smooth_raster(7, 75, 53)
    data = pillow_jpeg(r, quality=92, subsampling=subsampling)
    ours = jpeg_decode(data).pixels.astype(int)
    ref = pillow_pixels(data).astype(int)
    # libjpeg uses fancy upsampling for 4:2:0, hence the wider tolerance there.
    assert np.abs(ours - ref).max() <= tol
    assert np.abs(ours - ref).mean() < 1.5


def test_pillow_decodes_our_files():
    r = smooth_raster(8, 70, 44)
    for sub in ("444", "420"):
        data = jpeg_of(r, 90, sub)
        ours = jpeg_decode(data).pixels.astype(int)
        ref = pillow_pixels(data).astype(int)
        assert np.abs(ours - ref).mean() < 1.5


def test_restart_intervals_round_trip():
    r = smooth_raster(9, 50, 41)
    data = jpeg_encode(r, EncodeParams(85, "420", restart_interval=3))
    assert scan_segments(data).restart_markers
    plain = jpeg_encode(r, EncodeParams(85, "420"))
    assert jpeg_decode(data) == jpeg_decode(plain)
    assert np.abs(pillow_pixels(data).astype(int) - pillow_pixels(plain)).max() == 0


def test_flat_gray_has_no_ac():
    planes = decode_coefficients(jpeg_of(Raster.filled(32, 24, (100, 100, 100))))
    for comp in planes.components:
        assert not comp.blocks[..., 1:].any()
        assert len(np.unique(comp.blocks[..., 0])) == 1


def test_random_image_has_large_ac():
    planes = decode_coefficients(jpeg_of(random_raster(4, 24, 24)))
    assert (np.abs(planes.components[0].blocks[..., 1:]) >= 2).any()


def test_coefficient_reemission_identity():
    data = pillow_jpeg(smooth_raster(10, 66, 45), quality=80, subsampling=2)
    planes = decode_coefficients(data)
    again = encode_coefficients(planes)
    assert decode_coefficients(again) == planes
    assert jpeg_decode(again) == jpeg_decode(data)


def test_single_flip_is_local():
    planes = decode_coefficients(jpeg_of(random_raster(6, 24, 16)))
    blocks = planes.components[0].blocks.copy()
    blocks[1, 2, 5] ^= 1
    flipped = decode_coefficients(encode_coefficients(planes.replace_component(0, blocks)))
    diff = np.argwhere(flipped.components[0].blocks != planes.components[0].blocks)
    assert diff.tolist() == [[1, 2, 5]]
    assert flipped.components[1] == planes.components[1]


def test_subsampling_preserved():
    planes = decode_coefficients(jpeg_of(random_raster(2, 33, 17), 90, "420"))
    assert planes.sampling == ((2, 2), (1, 1), (1, 1))
    again = decode_coefficients(encode_coefficients(planes))
    assert again.sampling == planes.sampling
    y, cb = again.components[0].blocks.shape, again.components[1].blocks.shape
    assert y[:2] == (3, 5) and cb[:2] == (2, 3)


def test_png_two_by_two():
    px = np.array([[(0, 0, 0), (255, 255, 255)], [(10, 20, 30), (40, 50, 60)]], dtype=np.uint8)
    r = Raster(px)
    data = png_encode(r)
    assert png_decode(data) == r
    assert np.array_equal(pillow_pixels(data), px)


@pytest.mark.parametrize("optimize", [False, True])
def test_png_from_pillow(optimize):
    r = random_raster(11, 37, 29)
    assert png_decode(pillow_png(r, optimize=optimize)) == r


def test_png_rejects_bad_crc_and_signature():
    data = bytearray(png_encode(random_raster(1, 4, 4)))
    with pytest.raises(BadSignature):
        png_decode(b"\x00" + bytes(data[1:]))
    data[20] ^= 0xFF
    with pytest.raises(BadChecksum):
        png_decode(bytes(data))


def test_png_pixel_limit():
    with pytest.raises(PixelLimitExceeded):
        png_decode(png_encode(random_raster(1, 10, 10)), max_pixels=99)


def test_png_checksums_match_zlib():
    data = png_encode(random_raster(2, 5, 3))
    assert png_chunk_types(data) == [b"IHDR", b"IDAT", b"IEND"]
    pos = 8
    while pos < len(data):
        n = struct.unpack(">I", data[pos:pos + 4])[0]
        body = data[pos + 4:pos + 8 + n]
        assert struct.unpack(">I", data[pos + 8 + n:pos + 12 + n])[0] == zlib.crc32(body)
        if body[:4] == b"IDAT":
            raw = zlib.decompress(body[4:])
            assert len(raw) == 3 * (1 + 5 * 3)
        pos += 12 + n


def test_dct_pair_reproduces_blocks():
    rng = np.random.default_rng(0)
    blocks = rng.integers(-128, 128, size=(200, 8, 8)).astype(np.float64)
    back = np.floor(idct(fdct(blocks)) + 0.5)
    assert np.abs(back - blocks).max() <= 1


@given(seed=st.integers(0, 10 ** 6), w=st.integers(1, 48), h=st.integers(1, 48))
def test_png_lossless(seed, w, h):
    r = random_raster(seed, w, h)
    assert png_decode(png_encode(r)) == r


@given(seed=st.integers(0, 10 ** 6), w=st.integers(1, 40), h=st.integers(1, 40),
       q=st.integers(1, 100), sub=st.sampled_from(["444", "420"]))
def test_coefficient_round_trip(seed, w, h, q, sub):
    planes = decode_coefficients(jpeg_of(random_raster(seed, w, h), q, sub))
    assert decode_coefficients(encode_coefficients(planes)) == planes


@given(seed=st.integers(0, 10 ** 6))
def test_reencode_drops_metadata(seed):
    from icdr.corpus import infect
    data, _, _ = infect(jpeg_of(random_raster(seed, 16, 12)), "mixed", seed)
    out = jpeg_of(jpeg_decode(data))
    m = scan_segments(out)
    assert m.trailing_payload is None and extract_metadata_strings(m, out) == []
