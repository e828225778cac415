"""Self-contained JPEG (baseline) and PNG codecs."""

from .jpeg import (
    CoefficientPlanes, ComponentPlane, CorruptStream, EncodeParams, JpegError,
    UnsupportedCoding, decode_coefficients, encode_coefficients, jpeg_decode,
    jpeg_encode, planes_to_raster, raster_to_planes,
)
from .png import (
    BadChecksum, BadSignature, PixelLimitExceeded, PngError, UnsupportedPng, png_decode,
    png_encode,
)

__all__ = [
    "BadChecksum", "BadSignature", "CoefficientPlanes", "ComponentPlane", "CorruptStream",
    "EncodeParams", "JpegError", "PixelLimitExceeded", "PngError", "UnsupportedCoding", "UnsupportedPng",
    "decode_coefficients", "encode_coefficients", "jpeg_decode", "jpeg_encode",
    "planes_to_raster", "png_decode", "png_encode", "raster_to_planes",
]
