import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patchcrypt import (
    CodecError,
    Image,
    LabelMap,
    read_pgm_labels,
    read_ppm,
    write_pgm_labels,
    write_ppm,
)


def test_minimal_ppm():
    img = read_ppm(b"P6 1 1 255 " + bytes([10, 20, 30]))
    assert (img.width, img.height) == (1, 1)
    assert img.pixels[0, 0].tolist() == [10, 20, 30]


def test_header_comments_and_whitespace():
    data = b"P6\n# a comment\n  2 # another\n\t1\n255\n" + bytes(6)
    img = read_ppm(data)
    assert (img.width, img.height) == (2, 1)


def test_wrong_magic():
    with pytest.raises(CodecError, match="magic"):
        read_ppm(b"P5 1 1 255 " + bytes(3))


def test_unsupported_maxval():
    with pytest.raises(CodecError, match="maxval 65535"):
        read_ppm(b"P6 1 1 65535 " + bytes(6))


def test_truncated_data():
    with pytest.raises(CodecError, match="truncated"):
        read_ppm(b"P6 2 2 255 " + bytes(11))


def test_trailing_garbage():
    with pytest.raises(CodecError, match="trailing"):
        read_ppm(b"P6 1 1 255 " + bytes(4))


def test_dimension_overflow():
    with pytest.raises(CodecError, match="overflow"):
        read_ppm(b"P6 2147483648 1 255 " + bytes(9))


def test_zero_dimension():
    with pytest.raises(CodecError, match=">= 1"):
        read_ppm(b"P6 0 1 255 ")


def test_missing_header_token():
    with pytest.raises(CodecError, match="end of header"):
        read_ppm(b"P6 1 1")


def test_canonical_write_1x1_black():
    data = write_ppm(Image(np.zeros((1, 1, 3), dtype=np.uint8)))
    # canonical header "P6\n1 1\n255\n" is 11 bytes, then 3 zero bytes
    assert data == b"P6\n1 1\n255\n" + bytes(3)
    assert len(data) == 14


def test_write_deterministic():
    img = Image(np.full((2, 3, 3), 7, dtype=np.uint8))
    assert write_ppm(img) == write_ppm(img)


@st.composite
def rasters(draw, channels):
    h = draw(st.integers(min_value=1, max_value=64))
    w = draw(st.integers(min_value=1, max_value=64))
    n = h * w * channels
    body = draw(st.binary(min_size=n, max_size=n))
    return h, w, body


@given(rasters(3))
@settings(max_examples=120)
def test_ppm_roundtrip_byte_identity(hwb):
    h, w, body = hwb
    img = Image(np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3))
    data = write_ppm(img)
    again = read_ppm(data)
    assert again == img
    assert write_ppm(again) == data


@given(rasters(1))
@settings(max_examples=120)
def test_pgm_roundtrip_byte_identity(hwb):
    h, w, body = hwb
    lm = LabelMap(np.frombuffer(body, dtype=np.uint8).reshape(h, w))
    data = write_pgm_labels(lm)
    again = read_pgm_labels(data)
    assert again == lm
    assert write_pgm_labels(again) == data


def test_pgm_all_zero_2x2():
    lm = read_pgm_labels(b"P5 2 2 255 " + bytes(4))
    assert lm.labels.tolist() == [[0, 0], [0, 0]]


def test_pgm_ignore_value_preserved():
    lm = read_pgm_labels(b"P5 2 1 255 " + bytes([255, 3]))
    assert lm.labels.tolist() == [[255, 3]]
    assert write_pgm_labels(lm)[-2:] == bytes([255, 3])


def test_pgm_wrong_magic():
    with pytest.raises(CodecError, match="magic"):
        read_pgm_labels(b"P6 1 1 255 " + bytes(1))


def test_image_validation():
    with pytest.raises(CodecError):
        Image(np.zeros((2, 2), dtype=np.uint8))
    with pytest.raises(CodecError):
        Image(np.zeros((2, 2, 3), dtype=np.float32))
    with pytest.raises(CodecError):
        Image(np.zeros((0, 2, 3), dtype=np.uint8))


def test_image_pixels_read_only():
    img = Image(np.zeros((1, 1, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        img.pixels[0, 0, 0] = 1
