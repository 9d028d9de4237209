"""Shared constructors for randomized test inputs."""

import numpy as np

from patchcrypt import Image, SecretKey


def random_key(rng: np.random.Generator) -> SecretKey:
    return SecretKey(rng.bytes(32))


def random_image(rng: np.random.Generator, height: int, width: int) -> Image:
    return Image(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))
