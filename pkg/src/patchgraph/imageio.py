"""Binary PPM (P6) / PGM (P5) reading and writing, 8 bits per sample."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import PatchGraphError


class ImageFormatError(PatchGraphError, ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def _header_fields(blob, count):
    """Parse ``count`` whitespace-separated header tokens; returns tokens and raster offset."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(blob) and (blob[pos:pos + 1].isspace() or blob[pos:pos + 1] == b"#"):
            if blob[pos:pos + 1] == b"#":
                while pos < len(blob) and blob[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace() and blob[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated header", pos)
        tokens.append((blob[start:pos], start))
    if pos >= len(blob) or not blob[pos:pos + 1].isspace():
        raise ImageFormatError("missing whitespace before raster", pos)
    return tokens, pos + 1


def _decode(blob, magic, channels):
    if blob[:2] != magic:
        raise ImageFormatError(f"expected magic {magic.decode()}", 0)
    tokens, raster = _header_fields(blob, 4)
    values = []
    for token, offset in tokens[1:]:
        if not token.isdigit():
            raise ImageFormatError(f"expected a decimal number, got {token!r}", offset)
        values.append(int(token))
    width, height, maxval = values
    if width <= 0 or height <= 0:
        raise ImageFormatError("image dimensions must be positive", tokens[1][1])
    if not 0 < maxval < 256:
        raise ImageFormatError(f"only 8-bit images are supported, maxval {maxval}", tokens[3][1])
    need = width * height * channels
    if len(blob) - raster < need:
        raise ImageFormatError(
            f"raster holds {len(blob) - raster} bytes, expected {need}", len(blob))
    data = np.frombuffer(blob, dtype=np.uint8, count=need, offset=raster)
    return data.reshape(height, width, channels), maxval


def read_ppm(path):
    """(3, H, W) float array in [-1, 1]."""
    blob = Path(path).read_bytes()
    pixels, maxval = _decode(blob, b"P6", 3)
    return pixels.transpose(2, 0, 1).astype(np.float64) / maxval * 2.0 - 1.0


def read_pgm(path):
    blob = Path(path).read_bytes()
    pixels, _ = _decode(blob, b"P5", 1)
    return pixels[:, :, 0].copy()


def to_bytes(image):
    """[-1, 1] (C, H, W) image to rounded 8-bit (H, W, C)."""
    img = np.clip((np.asarray(image) + 1.0) * 127.5, 0, 255)
    return np.rint(img).astype(np.uint8).transpose(1, 2, 0)


def write_ppm(path, image):
    pixels = to_bytes(image)
    h, w, _ = pixels.shape
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + pixels.tobytes())


def write_pgm(path, gray):
    gray = np.asarray(gray, dtype=np.uint8)
    h, w = gray.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + gray.tobytes())
