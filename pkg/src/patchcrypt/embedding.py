"""Patch-embedding forward pass, key adaptation, and equivariance checks.

The embedding maps each P x P block to a D-dimensional token:

    token[d] = sum_i weight[d, i] * v[i] + bias[d]

where v is the normalized block in the canonical channel-major order shared
with the block cipher. Adapting the weights means gathering columns with
the same permutation the cipher applies to pixels; every product
weight'[d, i] * v'[i] then equals weight[d, sigma(i)] * v[sigma(i)], so the
sums over an encrypted block and a plain block agree term-for-term. The
only residual error is floating-point summation order, which is why the
forward pass accumulates in 64-bit and the default tolerance is 1e-9.

Normalization is deliberately channel-uniform: the shuffle moves values
across channels, so per-channel statistics would destroy the cancellation
(see the negative test in the suite).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .blockcipher import BlockGeometry, _blocks_matrix, encrypt_image
from .imagecodec import Image
from .keyschedule import SecretKey, generate_permutation

DEFAULT_NORM_MEAN = 0.5
DEFAULT_NORM_STD = 0.5


@dataclass(frozen=True, eq=False)
class PatchEmbedding:
    """Linear patch-to-token map: weight (D, 3*P*P) float32, bias (D,).

    Columns are indexed in the canonical flatten order c*P*P + r*P + s.
    norm_mean/norm_std are scalars applied uniformly to all channels.
    """

    patch_size: int
    weight: np.ndarray
    bias: np.ndarray
    norm_mean: float = DEFAULT_NORM_MEAN
    norm_std: float = DEFAULT_NORM_STD

    def __post_init__(self):
        p = self.patch_size
        if p < 1:
            raise ValueError(f"patch size must be >= 1, got {p}")
        w = np.ascontiguousarray(self.weight, dtype=np.float32)
        b = np.ascontiguousarray(self.bias, dtype=np.float32)
        if w.ndim != 2 or w.shape[1] != 3 * p * p:
            raise ValueError(
                f"weight must have shape (D, {3 * p * p}) for P={p}, got {w.shape}"
            )
        if b.shape != (w.shape[0],):
            raise ValueError(
                f"bias must have shape ({w.shape[0]},), got {b.shape}"
            )
        if not self.norm_std > 0:
            raise ValueError(f"norm_std must be > 0, got {self.norm_std}")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def dim(self) -> int:
        return int(self.weight.shape[0])


@dataclass(frozen=True, eq=False)
class TokenGrid:
    """rows x cols x D token tensor, 64-bit."""

    tokens: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.tokens, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"tokens must have shape (rows, cols, D), got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "tokens", arr)

    @property
    def rows(self) -> int:
        return int(self.tokens.shape[0])

    @property
    def cols(self) -> int:
        return int(self.tokens.shape[1])

    @property
    def dim(self) -> int:
        return int(self.tokens.shape[2])


@dataclass(frozen=True)
class EquivalenceReport:
    """Token-level comparison of the plain and adapted/encrypted forwards."""

    max_abs_diff: float
    mean_abs_diff: float
    token_count: int
    passed: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "max_abs_diff": self.max_abs_diff,
                "mean_abs_diff": self.mean_abs_diff,
                "tokens": self.token_count,
                "pass": self.passed,
            }
        )


def from_conv_layout(
    w4: np.ndarray,
    bias: np.ndarray,
    norm_mean: float = DEFAULT_NORM_MEAN,
    norm_std: float = DEFAULT_NORM_STD,
) -> PatchEmbedding:
    """Build a PatchEmbedding from a (D, 3, P, P) convolution kernel.

    Checkpoints store the embedding as a stride-P convolution; a C-order
    flatten of the (3, P, P) axes is exactly the canonical column order
    weight[d, c*P*P + r*P + s] = w4[d, c, r, s].
    """
    w4 = np.ascontiguousarray(w4, dtype=np.float32)
    if w4.ndim != 4 or w4.shape[1] != 3 or w4.shape[2] != w4.shape[3]:
        raise ValueError(
            f"expected kernel shape (D, 3, P, P), got {tuple(w4.shape)}"
        )
    d, _, p, _ = w4.shape
    bias = np.ascontiguousarray(bias, dtype=np.float32)
    if bias.shape != (d,):
        raise ValueError(f"expected bias shape ({d},), got {tuple(bias.shape)}")
    return PatchEmbedding(p, w4.reshape(d, 3 * p * p), bias, norm_mean, norm_std)


def to_conv_layout(pe: PatchEmbedding) -> np.ndarray:
    """PatchEmbedding weight back to the (D, 3, P, P) kernel layout."""
    p = pe.patch_size
    return pe.weight.reshape(pe.dim, 3, p, p).copy()


def embed_forward(pe: PatchEmbedding, img: Image) -> TokenGrid:
    """Run the embedding over every block of the image.

    Pixel values are scaled to [0, 1], normalized with the scalar
    mean/std, and accumulated against the weight matrix in float64.
    """
    BlockGeometry.for_image(img.width, img.height, pe.patch_size)
    blocks = _blocks_matrix(img, pe.patch_size)
    v = (blocks.astype(np.float64) / 255.0 - pe.norm_mean) / pe.norm_std
    tokens = v @ pe.weight.astype(np.float64).T + pe.bias.astype(np.float64)
    return TokenGrid(tokens)


def adapt_embedding(pe: PatchEmbedding, key: SecretKey) -> PatchEmbedding:
    """Gather weight columns with the key's permutation.

    weight'[d, i] = weight[d, sigma(i)] pairs with the cipher's
    out[i] = in[sigma(i)], so adapted weights on encrypted blocks reproduce
    the original products. Bias, patch size, and normalization are
    untouched.
    """
    sigma = generate_permutation(key, 3 * pe.patch_size * pe.patch_size)
    return PatchEmbedding(
        pe.patch_size,
        pe.weight[:, sigma.forward],
        pe.bias,
        pe.norm_mean,
        pe.norm_std,
    )


def verify_equivariance(
    pe: PatchEmbedding, key: SecretKey, img: Image, tol: float = 1e-9
) -> EquivalenceReport:
    """Compare plain-model/plain-image tokens against adapted/encrypted ones."""
    plain = embed_forward(pe, img)
    adapted = embed_forward(
        adapt_embedding(pe, key), encrypt_image(img, key, pe.patch_size)
    )
    diff = np.abs(plain.tokens - adapted.tokens)
    return EquivalenceReport(
        max_abs_diff=float(diff.max()),
        mean_abs_diff=float(diff.mean()),
        token_count=plain.rows * plain.cols,
        passed=bool(diff.max() <= tol),
    )
