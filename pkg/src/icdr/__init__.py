"""Zero-trust content disarm and reconstruction for JPEG images."""

__version__ = "0.1.0"
