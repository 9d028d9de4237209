"""Binary PPM (P6) images and PGM (P5) label maps, bit-exact.

Both codecs restrict maxval to 255 and emit a canonical header
("P6\\n<width> <height>\\n255\\n") so repeated writes are byte-identical.
Label maps use 255 as the ignore sentinel; the codec passes it through
untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# netpbm treats any of these as header whitespace
_WHITESPACE = frozenset(b" \t\n\r\x0b\x0c")
_MAX_DIMENSION = 2**31 - 1


class CodecError(ValueError):
    """Malformed or unsupported netpbm input."""


@dataclass(frozen=True, eq=False)
class Image:
    """H x W x 3 8-bit raster, row-major, pixel-interleaved R,G,B."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.pixels)
        if arr.dtype != np.uint8:
            raise CodecError(f"image pixels must be uint8, got {arr.dtype}")
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise CodecError(f"image must have shape (H, W, 3), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise CodecError("image dimensions must be >= 1")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True, eq=False)
class LabelMap:
    """H x W class ids in 0..K-1, with 255 reserved as the ignore value."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.labels)
        if arr.dtype != np.uint8:
            raise CodecError(f"labels must be uint8, got {arr.dtype}")
        if arr.ndim != 2:
            raise CodecError(f"label map must have shape (H, W), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise CodecError("label map dimensions must be >= 1")
        arr.setflags(write=False)
        object.__setattr__(self, "labels", arr)

    @property
    def height(self) -> int:
        return int(self.labels.shape[0])

    @property
    def width(self) -> int:
        return int(self.labels.shape[1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelMap):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    """Next header token, skipping whitespace and '#' comments."""
    n = len(data)
    while pos < n:
        c = data[pos]
        if c in _WHITESPACE:
            pos += 1
        elif c == ord("#"):
            while pos < n and data[pos] not in (ord("\n"), ord("\r")):
                pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos] not in _WHITESPACE:
        pos += 1
    if start == pos:
        raise CodecError("unexpected end of header")
    return data[start:pos], pos


def _parse_dimension(token: bytes, what: str) -> int:
    if not token.isdigit():
        raise CodecError(f"invalid {what} token {token!r}")
    value = int(token)
    if value == 0:
        raise CodecError(f"{what} must be >= 1")
    if value > _MAX_DIMENSION:
        raise CodecError(f"{what} {value} overflows the supported range")
    return value


def _parse_header(data: bytes, magic: bytes) -> tuple[int, int, int]:
    """Parse '<magic> W H 255' and return (width, height, data offset)."""
    if data[:2] != magic:
        raise CodecError(f"bad magic {data[:2]!r}, expected {magic.decode()}")
    tok, pos = _next_token(data, 2)
    width = _parse_dimension(tok, "width")
    tok, pos = _next_token(data, pos)
    height = _parse_dimension(tok, "height")
    tok, pos = _next_token(data, pos)
    if not tok.isdigit():
        raise CodecError(f"invalid maxval token {tok!r}")
    if int(tok) != 255:
        raise CodecError(f"unsupported maxval {int(tok)}, only 255")
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise CodecError("missing whitespace after maxval")
    return width, height, pos + 1


def _raster(data: bytes, offset: int, expected: int) -> bytes:
    have = len(data) - offset
    if have < expected:
        raise CodecError(f"truncated pixel data: need {expected} bytes, have {have}")
    if have > expected:
        raise CodecError(f"trailing data after pixel raster ({have - expected} bytes)")
    return data[offset : offset + expected]


def read_ppm(data: bytes) -> Image:
    """Parse a binary P6 PPM with maxval 255."""
    width, height, offset = _parse_header(data, b"P6")
    raw = _raster(data, offset, height * width * 3)
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
    return Image(pixels)


def write_ppm(img: Image) -> bytes:
    """Serialize to the canonical P6 form; byte-deterministic."""
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def read_pgm_labels(data: bytes) -> LabelMap:
    """Parse a binary P5 PGM with maxval 255 as a label map."""
    width, height, offset = _parse_header(data, b"P5")
    raw = _raster(data, offset, height * width)
    labels = np.frombuffer(raw, dtype=np.uint8).reshape(height, width)
    return LabelMap(labels)


def write_pgm_labels(lm: LabelMap) -> bytes:
    """Serialize to the canonical P5 form; byte-deterministic."""
    header = f"P5\n{lm.width} {lm.height}\n255\n".encode("ascii")
    return header + lm.labels.tobytes()
