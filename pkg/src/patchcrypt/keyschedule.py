"""Key handling and the deterministic permutation schedule.

Every random choice in the toolkit flows from a 256-bit secret key through
a fully specified pipeline: FNV-1a 64 compresses the key bytes to a seed,
SplitMix64 expands the seed into a stream of 64-bit words, and Fisher-Yates
with modulo draws turns the stream into a permutation. No library RNG is
involved, so two independent implementations given the same key and length
produce byte-identical permutations.
"""

from __future__ import annotations

import os
import secrets
from dataclasses import dataclass

import numpy as np

KEY_BYTES = 32

_MASK64 = (1 << 64) - 1
_FNV_OFFSET_BASIS = 0xCBF29CE484222325
_FNV_PRIME = 0x00000100000001B3
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_SPLITMIX_MUL1 = 0xBF58476D1CE4E5B9
_SPLITMIX_MUL2 = 0x94D049BB133111EB

_HEX_DIGITS = frozenset("0123456789abcdefABCDEF")


class KeyFormatError(ValueError):
    """Key material that cannot be parsed or has the wrong size."""


@dataclass(frozen=True)
class SecretKey:
    """256-bit key owned by the model creator; sole source of randomness."""

    data: bytes

    def __post_init__(self):
        if len(self.data) != KEY_BYTES:
            raise KeyFormatError(
                f"secret key must be {KEY_BYTES} bytes, got {len(self.data)}"
            )

    def hex(self) -> str:
        """Canonical 64-char lowercase hex form."""
        return self.data.hex()


@dataclass(frozen=True, eq=False)
class Permutation:
    """Bijection on range(n); forward[i] is where output slot i reads from.

    Applying the permutation to a vector x yields out[i] = x[forward[i]],
    i.e. a gather by the forward array.
    """

    forward: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.forward, dtype=np.int64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("permutation must be a non-empty 1-D index array")
        if arr.min() < 0 or arr.max() >= arr.size:
            raise ValueError("permutation indices must be a bijection on range(n)")
        if not (np.bincount(arr, minlength=arr.size) == 1).all():
            raise ValueError("permutation indices must be a bijection on range(n)")
        arr.setflags(write=False)
        object.__setattr__(self, "forward", arr)

    @property
    def n(self) -> int:
        return int(self.forward.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Permutation):
            return NotImplemented
        return np.array_equal(self.forward, other.forward)


def keygen() -> SecretKey:
    """Draw a fresh key from the OS entropy source."""
    return SecretKey(secrets.token_bytes(KEY_BYTES))


def parse_key(text: str) -> SecretKey:
    """Parse a 64-char hex string (case-insensitive) into a key.

    Raises KeyFormatError naming the offending position for non-hex input.
    """
    if len(text) != 2 * KEY_BYTES:
        raise KeyFormatError(
            f"key hex must be {2 * KEY_BYTES} characters, got {len(text)}"
        )
    for pos, ch in enumerate(text):
        if ch not in _HEX_DIGITS:
            raise KeyFormatError(f"invalid hex digit {ch!r} at position {pos}")
    return SecretKey(bytes.fromhex(text))


def derive_seed(key: SecretKey) -> int:
    """FNV-1a 64 over the raw key bytes, yielding the PRNG seed."""
    h = _FNV_OFFSET_BASIS
    for b in key.data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def prng_next(state: int) -> tuple[int, int]:
    """One SplitMix64 step: (output word, successor state).

    State is a plain unsigned 64-bit value; 0 is a valid state.
    """
    state = (state + _SPLITMIX_GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _SPLITMIX_MUL1) & _MASK64
    z = ((z ^ (z >> 27)) * _SPLITMIX_MUL2) & _MASK64
    return (z ^ (z >> 31)), state


def generate_permutation(key: SecretKey, n: int) -> Permutation:
    """Derive the length-n permutation for a key.

    Fisher-Yates over the identity, walking i from n-1 down to 1 and
    swapping with j = prng_next() mod (i+1). Deterministic in (key, n).
    """
    if n < 1:
        raise ValueError(f"permutation length must be >= 1, got {n}")
    forward = np.arange(n, dtype=np.int64)
    state = derive_seed(key)
    for i in range(n - 1, 0, -1):
        word, state = prng_next(state)
        j = word % (i + 1)
        forward[i], forward[j] = forward[j], forward[i]
    return Permutation(forward)


def invert(p: Permutation) -> Permutation:
    """Inverse permutation q with q.forward[p.forward[i]] == i."""
    inv = np.empty_like(p.forward)
    inv[p.forward] = np.arange(p.n, dtype=np.int64)
    return Permutation(inv)


def read_key_file(path) -> SecretKey:
    """Read a key file: one line of 64 hex chars, optional trailing newline."""
    with open(path, "r", encoding="ascii") as fh:
        return parse_key(fh.read().strip())


def write_key_file(path, key: SecretKey) -> None:
    """Write the canonical key file, mode-restricted where supported."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(key.hex() + "\n")
    try:
        os.chmod(path, 0o600)
    except OSError:
        pass
