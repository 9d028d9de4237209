#!/usr/bin/env python3
"""Timing for encrypt/decrypt across image sizes and block sizes."""

import argparse
import sys
import time

import numpy as np

from patchcrypt import Image, decrypt_image, encrypt_image, keygen


def best_of(repeats, fn):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=5, help="take the best of N runs")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    key = keygen()
    sizes = [(256, 256), (512, 512), (1024, 1024), (1024, 2048)]
    patches = [8, 16, 32]

    print(f"{'size':>12}  {'P':>3}  {'encrypt':>10}  {'decrypt':>10}  {'MPix/s':>8}")
    for h, w in sizes:
        img = Image(rng.integers(0, 256, size=(h, w, 3)).astype(np.uint8))
        for p in patches:
            if h % p or w % p:
                continue
            enc = encrypt_image(img, key, p)  # warm up + reuse for decrypt timing
            te = best_of(args.repeats, lambda: encrypt_image(img, key, p))
            td = best_of(args.repeats, lambda: decrypt_image(enc, key, p))
            mpix = h * w / te / 1e6
            print(
                f"{h:>5}x{w:<6}  {p:>3}  {te * 1e3:>8.2f}ms  {td * 1e3:>8.2f}ms"
                f"  {mpix:>8.1f}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
