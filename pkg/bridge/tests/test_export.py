import importlib.util
import subprocess

import numpy as np
import pytest
from safetensors import safe_open

from patchcrypt_bridge import (
    BIAS_NAME,
    WEIGHT_NAME,
    BridgeError,
    export_patch_embed,
    normalize_checkpoint,
)
from patchcrypt_bridge.cli import main

TIMM_PRESENT = importlib.util.find_spec("timm") is not None


def load(path):
    with safe_open(str(path), framework="numpy") as f:
        return (
            f.get_tensor(WEIGHT_NAME),
            f.get_tensor(BIAS_NAME),
            f.metadata() or {},
        )


def test_seeded_export_shapes_and_metadata(tmp_path):
    out = tmp_path / "vb.safetensors"
    summary = export_patch_embed("vit_base_patch16_384", out, seed=3)
    assert summary["dim"] == 768 and summary["patch_size"] == 16
    weight, bias, meta = load(out)
    assert weight.shape == (768, 3, 16, 16) and weight.dtype == np.float32
    assert bias.shape == (768,) and bias.dtype == np.float32
    assert meta["patchcrypt.dim"] == "768"
    assert meta["patchcrypt.patch_size"] == "16"
    assert meta["patchcrypt.source"] == "vit_base_patch16_384:seed-init:3"
    # truncated initialization: everything within two sigma of 0.02
    assert float(np.abs(weight).max()) <= 0.04 + 1e-7
    assert 0.015 < float(weight.std()) < 0.025


def test_vit_large_shapes(tmp_path):
    out = tmp_path / "vl.safetensors"
    export_patch_embed("vit_large_patch16_384", out, seed=0)
    weight, bias, _ = load(out)
    assert weight.shape == (1024, 3, 16, 16)
    assert bias.shape == (1024,)


def test_reexport_is_byte_identical(tmp_path):
    a, b, c = (tmp_path / n for n in ("a.st", "b.st", "c.st"))
    export_patch_embed("vit_base_patch16_384", a, seed=11)
    export_patch_embed("vit_base_patch16_384", b, seed=11)
    export_patch_embed("vit_base_patch16_384", c, seed=12)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_alternate_spelling_accepted(tmp_path):
    assert normalize_checkpoint("vit_base_patch_16_384") == "vit_base_patch16_384"
    out = tmp_path / "alias.safetensors"
    summary = export_patch_embed("vit_base_patch_16_384", out, seed=1)
    assert summary["checkpoint"] == "vit_base_patch16_384"
    assert load(out)[0].shape == (768, 3, 16, 16)


def test_unknown_checkpoint_rejected(tmp_path):
    with pytest.raises(BridgeError, match="unknown checkpoint"):
        export_patch_embed("resnet50", tmp_path / "x.st", seed=0)
    with pytest.raises(BridgeError, match="known:"):
        normalize_checkpoint("vit_base_patch16_224")


@pytest.mark.skipif(TIMM_PRESENT, reason="pretrained path available; fallback untestable")
def test_pretrained_unavailable_suggests_seed_init(tmp_path):
    with pytest.raises(BridgeError, match="seed-init"):
        export_patch_embed("vit_base_patch16_384", tmp_path / "x.st")


def test_primary_parser_reads_export(tmp_path, primary_bin):
    out = tmp_path / "vb.safetensors"
    export_patch_embed("vit_base_patch16_384", out, seed=2)
    proc = subprocess.run(
        [primary_bin, "inspect", "--in", str(out)], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert proc.stderr == ""
    assert WEIGHT_NAME in proc.stdout and BIAS_NAME in proc.stdout
    assert "[768, 3, 16, 16]" in proc.stdout
    assert "patchcrypt.source = vit_base_patch16_384:seed-init:2" in proc.stdout


def test_cli_export(tmp_path, capsys):
    out = tmp_path / "vb.safetensors"
    code = main(
        ["export", "--checkpoint", "vit_base_patch16_384",
         "--out", str(out), "--seed-init", "5"]
    )
    assert code == 0 and out.exists()
    assert "D=768" in capsys.readouterr().out
    assert main(["export", "--checkpoint", "nope", "--out", str(out)]) == 2
    assert main(["export"]) == 1
    assert main(["bogus"]) == 1
