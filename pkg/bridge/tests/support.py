"""Shared constructors for bridge test inputs."""

import numpy as np

from patchcrypt_bridge import write_p6


def write_random_ppm(path, rng, h, w):
    pixels = rng.integers(0, 256, size=(h, w, 3)).astype(np.uint8)
    path.write_bytes(write_p6(pixels))
    return pixels


def write_random_key(path, rng):
    key = rng.bytes(32)
    path.write_text(key.hex() + "\n")
    return key
