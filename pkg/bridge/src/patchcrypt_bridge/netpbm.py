"""Canonical-form P6 files only: "P6\\n<w> <h>\\n255\\n" + raw RGB bytes.

This is a format contract with the companion CLI, not a general codec;
files with comments, padding, or other maxvals are rejected on purpose.
"""

import re

import numpy as np

_HEADER = re.compile(rb"\AP6\n(\d+) (\d+)\n255\n")


class FormatError(ValueError):
    pass


def read_p6(data: bytes) -> np.ndarray:
    m = _HEADER.match(data)
    if not m:
        raise FormatError("not a canonical P6 file")
    w, h = int(m.group(1)), int(m.group(2))
    if w < 1 or h < 1:
        raise FormatError(f"bad dimensions {w}x{h}")
    raster = data[m.end() :]
    if len(raster) != w * h * 3:
        raise FormatError(f"raster is {len(raster)} bytes, expected {w * h * 3}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3).copy()


def write_p6(pixels: np.ndarray) -> bytes:
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise FormatError(f"expected (H, W, 3) pixels, got {pixels.shape}")
    h, w, _ = pixels.shape
    return b"P6\n%d %d\n255\n" % (w, h) + pixels.astype(np.uint8).tobytes()
