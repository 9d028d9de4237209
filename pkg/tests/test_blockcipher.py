import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from helpers import random_image, random_key
from patchcrypt import (
    BlockGeometry,
    GeometryError,
    Image,
    SecretKey,
    decrypt_image,
    encrypt_image,
    flatten_block,
    parse_key,
    unflatten_block,
)

ZERO_KEY = SecretKey(bytes(32))


def make_2x2_test_image():
    # pixel(r, s) = (10k+1, 10k+2, 10k+3) with k = 2r + s: all values distinct
    arr = np.zeros((2, 2, 3), dtype=np.uint8)
    for r in range(2):
        for s in range(2):
            k = 2 * r + s
            arr[r, s] = (10 * k + 1, 10 * k + 2, 10 * k + 3)
    return Image(arr)


def test_geometry_validation():
    geom = BlockGeometry.for_image(64, 32, 16)
    assert (geom.blocks_x, geom.blocks_y) == (4, 2)
    with pytest.raises(GeometryError, match="multiples of 16"):
        BlockGeometry.for_image(17, 16, 16)
    with pytest.raises(GeometryError):
        BlockGeometry.for_image(16, 16, 0)


def test_flatten_single_pixel():
    img = Image(np.array([[[10, 20, 30]]], dtype=np.uint8))
    assert flatten_block(img, 0, 0, 1).tolist() == [10, 20, 30]


def test_flatten_canonical_order_p2():
    img = make_2x2_test_image()
    flat = flatten_block(img, 0, 0, 2)
    # independent enumeration of flat[c*P*P + r*P + s] = pixel(r, s, c)
    expected = [
        int(img.pixels[r, s, c]) for c in range(3) for r in range(2) for s in range(2)
    ]
    assert flat.tolist() == expected
    assert flat.tolist() == [1, 11, 21, 31, 2, 12, 22, 32, 3, 13, 23, 33]


def test_flatten_block_coordinates():
    img = random_image(np.random.default_rng(3), 4, 6)
    flat = flatten_block(img, 2, 1, 2)
    block = img.pixels[2:4, 4:6, :]
    assert flat.tolist() == block.transpose(2, 0, 1).reshape(-1).tolist()


def test_flatten_out_of_range_block():
    img = make_2x2_test_image()
    with pytest.raises(ValueError, match="outside"):
        flatten_block(img, 1, 0, 2)


def test_unflatten_inverts_flatten():
    img = make_2x2_test_image()
    flat = flatten_block(img, 0, 0, 2)
    assert np.array_equal(unflatten_block(flat, 2), img.pixels)


def test_encrypt_identity_sigma_is_noop():
    # the zero key's sigma on n=3 is the identity (frozen in oracles)
    img = random_image(np.random.default_rng(1), 3, 5)
    assert encrypt_image(img, ZERO_KEY, 1) == img


def test_encrypt_2x2_zero_key_frozen_raster():
    img = make_2x2_test_image()
    enc = encrypt_image(img, ZERO_KEY, 2)
    # derived by applying the oracle n=12 permutation to the flattened block
    expected = [
        [(11, 31, 1), (13, 33, 21)],
        [(3, 2, 23), (32, 22, 12)],
    ]
    assert [[tuple(px) for px in row] for row in enc.pixels.tolist()] == expected


def test_encrypt_matches_oracle_permutation_per_block(rng):
    img = random_image(rng, 4, 6)
    key = random_key(rng)
    enc = encrypt_image(img, key, 2)
    sigma = oracles.key_permutation(key.data, 12)
    for by in range(2):
        for bx in range(3):
            flat_in = flatten_block(img, bx, by, 2).tolist()
            flat_out = flatten_block(enc, bx, by, 2).tolist()
            assert flat_out == [flat_in[sigma[i]] for i in range(12)]


def test_encrypt_preserves_value_multiset_per_block(rng):
    img = random_image(rng, 8, 8)
    key = random_key(rng)
    enc = encrypt_image(img, key, 4)
    for by in range(2):
        for bx in range(2):
            assert sorted(flatten_block(img, bx, by, 4).tolist()) == sorted(
                flatten_block(enc, bx, by, 4).tolist()
            )


def test_encrypt_rejects_non_divisible():
    img = random_image(np.random.default_rng(2), 17, 16)
    with pytest.raises(GeometryError, match="multiples of 16"):
        encrypt_image(img, ZERO_KEY, 16)


@given(
    key=st.binary(min_size=32, max_size=32),
    patch=st.integers(min_value=1, max_value=4),
    blocks_y=st.integers(min_value=1, max_value=4),
    blocks_x=st.integers(min_value=1, max_value=4),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
@settings(max_examples=60, deadline=None)
def test_roundtrip_exact(key, patch, blocks_y, blocks_x, seed):
    img = random_image(np.random.default_rng(seed), blocks_y * patch, blocks_x * patch)
    k = SecretKey(key)
    assert decrypt_image(encrypt_image(img, k, patch), k, patch) == img


def test_single_block_degenerate_roundtrip(rng):
    img = random_image(rng, 16, 16)
    key = random_key(rng)
    assert decrypt_image(encrypt_image(img, key, 16), key, 16) == img


def test_wrong_key_decrypt_differs(rng):
    img = random_image(rng, 4, 4)
    mismatches = 0
    for _ in range(100):
        k1, k2 = random_key(rng), random_key(rng)
        if decrypt_image(encrypt_image(img, k1, 2), k2, 2) != img:
            mismatches += 1
    assert mismatches >= 99


def test_block_independence(rng):
    img = random_image(rng, 6, 9)
    key = random_key(rng)
    enc = encrypt_image(img, key, 3)
    sigma = oracles.key_permutation(key.data, 27)
    out = np.empty_like(img.pixels)
    for by in range(2):
        for bx in range(3):
            flat = flatten_block(img, bx, by, 3)
            shuffled = np.array([flat[sigma[i]] for i in range(27)], dtype=np.uint8)
            out[by * 3 : by * 3 + 3, bx * 3 : bx * 3 + 3, :] = unflatten_block(
                shuffled, 3
            )
    assert enc == Image(out)


def test_visual_protection_smoke(rng):
    # gradient image: every block has distinct values, so a random key
    # should essentially never leave it unchanged
    ramp = np.arange(32 * 32 * 3, dtype=np.uint32) % 256
    img = Image(ramp.astype(np.uint8).reshape(32, 32, 3))
    for _ in range(10):
        assert encrypt_image(img, random_key(rng), 16) != img


def test_encrypt_deterministic(rng):
    img = random_image(rng, 8, 8)
    key = random_key(rng)
    a = encrypt_image(img, key, 4)
    b = encrypt_image(img, key, 4)
    assert a == b
    assert a.pixels.tobytes() == b.pixels.tobytes()


def test_rotation_key_p1():
    # sigma = [2, 0, 1] on n=3: out[i] = in[sigma(i)] maps (R,G,B) -> (B,R,G)
    key = parse_key(oracles.ROTATE_N3_KEY_HEX)
    img = Image(np.array([[[10, 20, 30]]], dtype=np.uint8))
    enc = encrypt_image(img, key, 1)
    assert enc.pixels[0, 0].tolist() == [30, 10, 20]
    assert decrypt_image(enc, key, 1) == img
