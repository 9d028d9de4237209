"""Check the companion CLI against a torch reference forward pass.

The reference side is a stride-P convolution in float32, which is how the
embedding is computed inside real ViT checkpoints. Three numbers come out:

- parity: reference tokens vs the CLI's plain tokens on the same image
  (cross-implementation agreement, float32 vs float64 rounding apart);
- equivariance: reference forward with CLI-adapted weights on the
  CLI-encrypted image vs reference forward with plain weights on the plain
  image (the core identity, measured entirely outside the CLI's code);
- the CLI verify report's own max difference, carried along for reference.

All primary interaction is subprocess plus files: adapt-model, encrypt,
verify --dump-tokens.
"""

import json
import os
import shutil
import subprocess
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from safetensors import safe_open

from .export import BIAS_NAME, WEIGHT_NAME, BridgeError
from .netpbm import read_p6

UNIFORM_STATS = ((0.5, 0.5, 0.5), (0.5, 0.5, 0.5))
IMAGENET_STATS = ((0.485, 0.456, 0.406), (0.229, 0.224, 0.225))

PRIMARY_ENV_VAR = "PATCHCRYPT_BIN"


@dataclass(frozen=True)
class BridgeReport:
    checkpoint: str
    dim: int
    patch_size: int
    tol: float
    parity_max_abs_diff: float
    equivariance_max_abs_diff: float
    primary_max_abs_diff: float
    parity_pass: bool
    equivariance_pass: bool
    passed: bool

    def __post_init__(self):
        if min(
            self.parity_max_abs_diff,
            self.equivariance_max_abs_diff,
            self.primary_max_abs_diff,
        ) < 0:
            raise BridgeError("differences cannot be negative")
        if self.parity_pass != (self.parity_max_abs_diff <= self.tol):
            raise BridgeError("parity_pass contradicts the measured difference")
        if self.equivariance_pass != (self.equivariance_max_abs_diff <= self.tol):
            raise BridgeError("equivariance_pass contradicts the measured difference")
        if self.passed != (self.parity_pass and self.equivariance_pass):
            raise BridgeError("passed must be the conjunction of the two checks")

    @classmethod
    def from_measurements(
        cls, checkpoint, dim, patch_size, tol, parity, equivariance, primary
    ) -> "BridgeReport":
        return cls(
            checkpoint=checkpoint,
            dim=dim,
            patch_size=patch_size,
            tol=tol,
            parity_max_abs_diff=parity,
            equivariance_max_abs_diff=equivariance,
            primary_max_abs_diff=primary,
            parity_pass=parity <= tol,
            equivariance_pass=equivariance <= tol,
            passed=parity <= tol and equivariance <= tol,
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _primary_bin(explicit: str | None = None) -> str:
    exe = explicit or os.environ.get(PRIMARY_ENV_VAR) or shutil.which("patchcrypt")
    if not exe:
        raise BridgeError(
            "companion CLI 'patchcrypt' not found; install it or set "
            f"${PRIMARY_ENV_VAR}"
        )
    return exe


def _run(cmd: list[str]) -> str:
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise BridgeError(
            f"'{' '.join(cmd[:2])}' exited {proc.returncode}: "
            f"{proc.stderr.strip() or proc.stdout.strip()}"
        )
    return proc.stdout


def _load_embedding(path: Path):
    try:
        with safe_open(str(path), framework="numpy") as f:
            names = set(f.keys())
            if WEIGHT_NAME not in names:
                raise BridgeError(f"{path}: no tensor named {WEIGHT_NAME!r}")
            weight = f.get_tensor(WEIGHT_NAME)
            bias = (
                f.get_tensor(BIAS_NAME)
                if BIAS_NAME in names
                else np.zeros(weight.shape[0], dtype=np.float32)
            )
            meta = f.metadata() or {}
    except BridgeError:
        raise
    except Exception as exc:
        raise BridgeError(f"cannot read archive {path}: {exc}") from exc
    if weight.ndim != 4 or weight.shape[1] != 3 or weight.shape[2] != weight.shape[3]:
        raise BridgeError(
            f"{path}: weight shape {tuple(weight.shape)} is not [D, 3, P, P]"
        )
    if bias.shape != (weight.shape[0],):
        raise BridgeError(f"{path}: bias shape {tuple(bias.shape)} does not match")
    return weight.astype(np.float32), bias.astype(np.float32), meta


def reference_tokens(pixels, weight, bias, patch_size, stats=UNIFORM_STATS):
    """Stride-P conv2d in float32; returns tokens as [rows, cols, D]."""
    mean, std = (np.asarray(s, dtype=np.float32).reshape(3, 1, 1) for s in stats)
    x = pixels.astype(np.float32).transpose(2, 0, 1) / 255.0
    x = (x - mean) / std
    with torch.no_grad():
        out = F.conv2d(
            torch.from_numpy(x)[None],
            torch.from_numpy(weight),
            torch.from_numpy(bias),
            stride=patch_size,
        )
    return out[0].permute(1, 2, 0).numpy()


def parity_check(
    model_path,
    image_path,
    key_path,
    tol: float = 1e-4,
    channel_norm: bool = False,
    workdir=None,
    primary: str | None = None,
) -> BridgeReport:
    exe = _primary_bin(primary)
    model_path = Path(model_path)
    weight, bias, meta = _load_embedding(model_path)
    dim, _, p, _ = weight.shape

    wd = Path(workdir) if workdir else Path(tempfile.mkdtemp(prefix="bridge-parity-"))
    wd.mkdir(parents=True, exist_ok=True)
    adapted_path = wd / "adapted.safetensors"
    encrypted_path = wd / "encrypted.ppm"
    tokens_path = wd / "tokens.safetensors"

    key = ["--key", str(key_path)]
    _run([exe, "adapt-model", *key, "--in", str(model_path), "--out", str(adapted_path)])
    _run(
        [exe, "encrypt", *key, "--patch-size", str(p),
         "--in", str(image_path), "--out", str(encrypted_path)]
    )
    out = _run(
        [exe, "verify", *key, "--model", str(model_path), "--image", str(image_path),
         "--dump-tokens", str(tokens_path)]
    )
    primary_report = json.loads(out.strip().splitlines()[-1])

    with safe_open(str(tokens_path), framework="numpy") as f:
        primary_plain = f.get_tensor("tokens.plain")

    stats = IMAGENET_STATS if channel_norm else UNIFORM_STATS
    plain_pixels = read_p6(Path(image_path).read_bytes())
    encrypted_pixels = read_p6(encrypted_path.read_bytes())
    adapted_weight, adapted_bias, _ = _load_embedding(adapted_path)

    ref_plain = reference_tokens(plain_pixels, weight, bias, p, stats)
    ref_cross = reference_tokens(
        encrypted_pixels, adapted_weight, adapted_bias, p, stats
    )
    if ref_plain.shape != primary_plain.shape:
        raise BridgeError(
            f"token grids disagree: reference {ref_plain.shape} vs "
            f"primary {primary_plain.shape}"
        )
    parity = float(np.abs(ref_plain.astype(np.float64) - primary_plain).max())
    equivariance = float(
        np.abs(ref_cross.astype(np.float64) - ref_plain.astype(np.float64)).max()
    )
    return BridgeReport.from_measurements(
        checkpoint=meta.get("patchcrypt.source", "unknown"),
        dim=int(dim),
        patch_size=int(p),
        tol=tol,
        parity=parity,
        equivariance=equivariance,
        primary=float(primary_report["max_abs_diff"]),
    )
