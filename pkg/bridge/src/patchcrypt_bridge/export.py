"""Export a ViT patch-embedding layer into the shared archive format.

The pretrained path pulls the layer out of a timm checkpoint. When timm
or the network is unavailable, --seed-init produces a layer with the
exact architecture shapes and the usual ViT initialization (normal with
std 0.02, truncated at two sigma), which is enough for every numerical
check in this package; the tolerances do not depend on the trained values.
"""

import json
from pathlib import Path

import numpy as np
from safetensors.numpy import save_file

WEIGHT_NAME = "patch_embed.proj.weight"
BIAS_NAME = "patch_embed.proj.bias"

# embedding width and patch size are fixed by the architecture name
CHECKPOINTS = {
    "vit_base_patch16_384": (768, 16),
    "vit_large_patch16_384": (1024, 16),
}
# tolerated alternative spellings seen in the wild
_ALIASES = {
    "vit_base_patch_16_384": "vit_base_patch16_384",
    "vit_large_patch_16_384": "vit_large_patch16_384",
}


class BridgeError(ValueError):
    pass


def normalize_checkpoint(checkpoint: str) -> str:
    cid = _ALIASES.get(checkpoint, checkpoint)
    if cid not in CHECKPOINTS:
        known = ", ".join(sorted(CHECKPOINTS))
        raise BridgeError(f"unknown checkpoint {checkpoint!r} (known: {known})")
    return cid


def _fetch_pretrained(cid: str, d: int, p: int):
    try:
        import timm
    except ImportError as exc:
        raise BridgeError(
            "timm is not installed, so the pretrained weights cannot be "
            "fetched; pass --seed-init N for an architecture-faithful "
            "randomly initialized layer"
        ) from exc
    try:
        model = timm.create_model(cid, pretrained=True)
    except Exception as exc:
        raise BridgeError(f"could not retrieve checkpoint {cid!r}: {exc}") from exc
    weight = model.patch_embed.proj.weight.detach().cpu().numpy()
    bias = model.patch_embed.proj.bias.detach().cpu().numpy()
    if weight.shape != (d, 3, p, p) or bias.shape != (d,):
        raise BridgeError(
            f"checkpoint {cid!r} has unexpected layer shapes "
            f"{weight.shape} / {bias.shape}"
        )
    return weight.astype(np.float32), bias.astype(np.float32)


def _seed_init(d: int, p: int, seed: int):
    rng = np.random.default_rng(seed)
    std = 0.02
    weight = rng.standard_normal((d, 3, p, p)) * std
    # redraw the tail instead of clipping, like the usual truncated init
    for _ in range(8):
        tail = np.abs(weight) > 2 * std
        if not tail.any():
            break
        weight[tail] = rng.standard_normal(int(tail.sum())) * std
    weight = np.clip(weight, -2 * std, 2 * std)
    bias = rng.standard_normal(d) * std
    return weight.astype(np.float32), bias.astype(np.float32)


def _canonicalize_header(path: Path) -> None:
    """Rewrite the JSON header with sorted keys and no padding.

    The stock writer emits its metadata map in hash order, which makes two
    otherwise identical exports differ byte-for-byte. Only the header is
    rewritten; the tensor buffer and the offsets within it are untouched,
    so the file stays valid for every reader.
    """
    data = path.read_bytes()
    n = int.from_bytes(data[:8], "little")
    header = json.loads(data[8 : 8 + n])
    raw = json.dumps(
        header, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")
    path.write_bytes(len(raw).to_bytes(8, "little") + raw + data[8 + n :])


def export_patch_embed(checkpoint: str, out_path, seed: int | None = None) -> dict:
    """Write the layer to out_path; returns a summary dict."""
    cid = normalize_checkpoint(checkpoint)
    d, p = CHECKPOINTS[cid]
    if seed is None:
        weight, bias = _fetch_pretrained(cid, d, p)
        source = cid
    else:
        weight, bias = _seed_init(d, p, seed)
        source = f"{cid}:seed-init:{seed}"
    metadata = {
        "patchcrypt.dim": str(d),
        "patchcrypt.patch_size": str(p),
        "patchcrypt.source": source,
    }
    save_file({WEIGHT_NAME: weight, BIAS_NAME: bias}, str(out_path), metadata=metadata)
    _canonicalize_header(Path(out_path))
    return {
        "checkpoint": cid,
        "dim": d,
        "patch_size": p,
        "source": source,
        "out": str(out_path),
    }
