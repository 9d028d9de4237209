#!/usr/bin/env python3
"""End-to-end walkthrough on synthetic data.

Generates a key, encrypts a structured test image, shows that decryption
restores it byte-for-byte, adapts a randomly initialized patch embedding,
checks token equivalence, and scores a fake prediction against a fake
ground truth. Everything lands in --out.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from patchcrypt import (
    ConfusionMatrix,
    Image,
    LabelMap,
    PatchEmbedding,
    TensorArchive,
    accumulate,
    adapt_archive,
    compute,
    decrypt_image,
    encrypt_image,
    generate_permutation,
    keygen,
    load_patch_embedding,
    read_archive,
    record_from_array,
    verify_equivariance,
    write_archive,
    write_key_file,
    write_pgm_labels,
    write_ppm,
)
from patchcrypt.tensorarchive import DEFAULT_BIAS_NAME, DEFAULT_WEIGHT_NAME


def make_test_image(size: int) -> Image:
    """A gradient with a bright disc: enough structure to see scrambling."""
    yy, xx = np.mgrid[0:size, 0:size]
    r = (yy / size * 255).astype(np.uint8)
    g = (xx / size * 255).astype(np.uint8)
    b = np.full((size, size), 64, dtype=np.uint8)
    disc = (yy - size / 2) ** 2 + (xx - size / 2) ** 2 < (size / 4) ** 2
    pixels = np.stack([r, g, b], axis=-1)
    pixels[disc] = (255, 255, 255)
    return Image(pixels)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo_output", help="output directory")
    ap.add_argument("--seed", type=int, default=7, help="rng seed for the fake model")
    ap.add_argument("--patch-size", type=int, default=16)
    ap.add_argument("--size", type=int, default=224, help="test image side length")
    args = ap.parse_args()

    p = args.patch_size
    if args.size % p:
        ap.error(f"--size must be a multiple of --patch-size ({p})")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    key = keygen()
    write_key_file(out / "demo.key", key)
    print(f"key          -> {out / 'demo.key'}")

    img = make_test_image(args.size)
    (out / "plain.ppm").write_bytes(write_ppm(img))
    enc = encrypt_image(img, key, p)
    (out / "encrypted.ppm").write_bytes(write_ppm(enc))
    dec = decrypt_image(enc, key, p)
    assert dec == img, "round trip must restore the image exactly"
    print("images       -> plain.ppm / encrypted.ppm (round trip exact)")

    dim = 768
    weight = (rng.standard_normal((dim, 3, p, p)) * 0.02).astype(np.float32)
    bias = np.zeros(dim, dtype=np.float32)
    model = TensorArchive(
        [
            record_from_array(DEFAULT_WEIGHT_NAME, weight),
            record_from_array(DEFAULT_BIAS_NAME, bias),
        ],
        {"demo": "randomly initialized embedding"},
    )
    (out / "model.safetensors").write_bytes(write_archive(model))
    adapted = adapt_archive(model, key)
    (out / "model.adapted.safetensors").write_bytes(write_archive(adapted))
    print("model        -> model.safetensors / model.adapted.safetensors")

    pe = load_patch_embedding(read_archive((out / "model.safetensors").read_bytes()))
    report = verify_equivariance(pe, key, img)
    print(f"equivalence  -> {report.to_json()}")
    assert report.passed

    # sanity: the adapted file really holds the column-gathered kernel
    pe_adapted = load_patch_embedding(
        read_archive((out / "model.adapted.safetensors").read_bytes())
    )
    sigma = generate_permutation(key, 3 * p * p)
    assert np.array_equal(pe_adapted.weight, pe.weight[:, sigma.forward])

    classes = 5
    gt = rng.integers(0, classes, size=(64, 64)).astype(np.uint8)
    pred = gt.copy()
    flip = rng.random((64, 64)) < 0.12
    pred[flip] = rng.integers(0, classes, size=int(flip.sum())).astype(np.uint8)
    gt[rng.random((64, 64)) < 0.05] = 255
    (out / "gt.pgm").write_bytes(write_pgm_labels(LabelMap(gt)))
    (out / "pred.pgm").write_bytes(write_pgm_labels(LabelMap(pred)))
    cm = accumulate(ConfusionMatrix.zeros(classes), LabelMap(gt), LabelMap(pred))
    metrics = compute(cm)
    print(
        f"metrics      -> aAcc {metrics.aAcc:.2f}  mAcc {metrics.mAcc:.2f}  "
        f"mIoU {metrics.mIoU:.2f}"
    )
    print(f"done; artifacts in {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
