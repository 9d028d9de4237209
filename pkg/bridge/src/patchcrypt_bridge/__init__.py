"""Companion package for the patchcrypt CLI.

Exports real (or architecture-faithful seeded) ViT patch-embedding layers
into the shared .safetensors format and independently re-checks the
adapted-weights-on-encrypted-image identity with a torch convolution as
the reference. Talks to the main tool only through its command line and
file formats; nothing here imports the patchcrypt library.
"""

from .export import (
    BIAS_NAME,
    CHECKPOINTS,
    WEIGHT_NAME,
    BridgeError,
    export_patch_embed,
    normalize_checkpoint,
)
from .netpbm import FormatError, read_p6, write_p6
from .parity import IMAGENET_STATS, UNIFORM_STATS, BridgeReport, parity_check

__version__ = "0.1.0"

__all__ = [
    "BIAS_NAME",
    "CHECKPOINTS",
    "WEIGHT_NAME",
    "BridgeError",
    "BridgeReport",
    "FormatError",
    "IMAGENET_STATS",
    "UNIFORM_STATS",
    "export_patch_embed",
    "normalize_checkpoint",
    "parity_check",
    "read_p6",
    "write_p6",
]
