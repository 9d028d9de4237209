"""Block-wise pixel shuffling aligned to the ViT patch grid.

An image is cut into non-overlapping P x P blocks and the 3*P*P values of
each block are rearranged by one shared key-derived permutation. The
canonical within-block order is channel-major:

    flat[c*P*P + r*P + s] = pixel(row r, col s, channel c)

which is exactly the column order of the patch-embedding weight matrix, so
the same permutation can be applied to either side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagecodec import Image
from .keyschedule import Permutation, SecretKey, generate_permutation, invert


class GeometryError(ValueError):
    """Image dimensions that do not align with the block grid."""


@dataclass(frozen=True)
class BlockGeometry:
    """Grid of non-overlapping P x P blocks covering an image exactly."""

    patch_size: int
    blocks_x: int
    blocks_y: int

    @classmethod
    def for_image(cls, width: int, height: int, patch_size: int) -> "BlockGeometry":
        if patch_size < 1:
            raise GeometryError(f"patch size must be >= 1, got {patch_size}")
        if width % patch_size or height % patch_size:
            raise GeometryError(
                f"image {width}x{height} is not divisible into {patch_size}x"
                f"{patch_size} blocks; width and height must be multiples of "
                f"{patch_size}"
            )
        return cls(patch_size, width // patch_size, height // patch_size)


def flatten_block(img: Image, bx: int, by: int, patch_size: int) -> np.ndarray:
    """Extract block (bx, by) as a 3*P*P vector in canonical order."""
    geom = BlockGeometry.for_image(img.width, img.height, patch_size)
    if not (0 <= bx < geom.blocks_x and 0 <= by < geom.blocks_y):
        raise ValueError(
            f"block ({bx}, {by}) outside grid {geom.blocks_x}x{geom.blocks_y}"
        )
    p = patch_size
    block = img.pixels[by * p : (by + 1) * p, bx * p : (bx + 1) * p, :]
    return np.ascontiguousarray(block.transpose(2, 0, 1)).reshape(-1)


def unflatten_block(flat: np.ndarray, patch_size: int) -> np.ndarray:
    """Inverse of flatten_block: 3*P*P vector back to a (P, P, 3) block."""
    p = patch_size
    flat = np.asarray(flat, dtype=np.uint8)
    if flat.shape != (3 * p * p,):
        raise ValueError(f"expected {3 * p * p} values, got {flat.shape}")
    return flat.reshape(3, p, p).transpose(1, 2, 0)


def _blocks_matrix(img: Image, p: int) -> np.ndarray:
    """All blocks as an array of shape (blocks_y, blocks_x, 3*P*P)."""
    by, bx = img.height // p, img.width // p
    arr = img.pixels.reshape(by, p, bx, p, 3)
    return arr.transpose(0, 2, 4, 1, 3).reshape(by, bx, 3 * p * p)


def _assemble(blocks: np.ndarray, p: int) -> np.ndarray:
    by, bx, _ = blocks.shape
    arr = blocks.reshape(by, bx, 3, p, p)
    return arr.transpose(0, 3, 1, 4, 2).reshape(by * p, bx * p, 3)


def _permute_blocks(img: Image, perm: Permutation, patch_size: int) -> Image:
    BlockGeometry.for_image(img.width, img.height, patch_size)
    blocks = _blocks_matrix(img, patch_size)
    shuffled = blocks[:, :, perm.forward]
    return Image(np.ascontiguousarray(_assemble(shuffled, patch_size)))


def encrypt_image(img: Image, key: SecretKey, patch_size: int) -> Image:
    """Shuffle every block with the key's permutation: out[i] = in[sigma(i)].

    Dimensions are unchanged; dimensions not divisible by the patch size are
    a hard error, never padded.
    """
    sigma = generate_permutation(key, 3 * patch_size * patch_size)
    return _permute_blocks(img, sigma, patch_size)


def decrypt_image(img: Image, key: SecretKey, patch_size: int) -> Image:
    """Exact inverse of encrypt_image for the same key and patch size."""
    sigma = generate_permutation(key, 3 * patch_size * patch_size)
    return _permute_blocks(img, invert(sigma), patch_size)
