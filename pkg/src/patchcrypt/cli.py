"""Command-line interface: keygen, encrypt, decrypt, adapt-model, verify, eval, inspect.

Exit codes: 0 success, 1 usage error, 2 data or format error,
3 verification failed (verify only).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import segmetrics, tensorarchive
from .blockcipher import decrypt_image, encrypt_image
from .embedding import verify_equivariance
from .imagecodec import read_pgm_labels, read_ppm, write_ppm
from .keyschedule import (
    SecretKey,
    keygen,
    parse_key,
    read_key_file,
    write_key_file,
)
from .tensorarchive import (
    DTYPE_SIZES,
    adapt_archive,
    load_patch_embedding,
    read_archive,
    record_from_array,
    write_archive,
)

KEY_ENV_VAR = "PATCHCRYPT_KEY"

# every module error type subclasses ValueError
_DATA_ERRORS = (ValueError, OSError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="patchcrypt",
        description=(
            "Block-wise perceptual image encryption with matching "
            "patch-embedding adaptation."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_key(p):
        p.add_argument(
            "--key",
            metavar="FILE",
            help=f"key file (64 hex chars); falls back to ${KEY_ENV_VAR}",
        )

    p = sub.add_parser("keygen", help="generate a fresh secret key file")
    p.add_argument("--out", required=True, metavar="FILE", help="key file to write")
    p.add_argument(
        "--force", action="store_true", help="overwrite an existing key file"
    )
    p.set_defaults(func=_cmd_keygen)

    for name, verb in (("encrypt", "encrypt"), ("decrypt", "decrypt")):
        p = sub.add_parser(name, help=f"{verb} a .ppm image or a directory of them")
        add_key(p)
        p.add_argument(
            "--patch-size",
            type=int,
            default=16,
            metavar="P",
            help="block size in pixels (default: 16)",
        )
        p.add_argument("--in", dest="input", required=True, metavar="PATH")
        p.add_argument("--out", dest="output", required=True, metavar="PATH")
        p.set_defaults(func=_cmd_encrypt if name == "encrypt" else _cmd_decrypt)

    p = sub.add_parser("adapt-model", help="permute a checkpoint's patch embedding")
    add_key(p)
    p.add_argument("--in", dest="input", required=True, metavar="FILE")
    p.add_argument("--out", dest="output", required=True, metavar="FILE")
    p.add_argument(
        "--weight-name",
        default=tensorarchive.DEFAULT_WEIGHT_NAME,
        help=f"weight tensor name (default: {tensorarchive.DEFAULT_WEIGHT_NAME})",
    )
    p.add_argument(
        "--bias-name",
        default=tensorarchive.DEFAULT_BIAS_NAME,
        help=f"bias tensor name (default: {tensorarchive.DEFAULT_BIAS_NAME})",
    )
    p.add_argument(
        "--patch-size",
        type=int,
        default=None,
        metavar="P",
        help="required when the weight is stored flat as [D, 3*P*P]",
    )
    p.set_defaults(func=_cmd_adapt_model)

    p = sub.add_parser(
        "verify",
        help="check that adapted weights on an encrypted image reproduce "
        "the plain tokens",
    )
    add_key(p)
    p.add_argument("--model", required=True, metavar="FILE", help=".safetensors model")
    p.add_argument("--image", required=True, metavar="FILE", help=".ppm image")
    p.add_argument(
        "--tol",
        type=float,
        default=1e-9,
        help="max absolute token difference to pass (default: 1e-9)",
    )
    p.add_argument("--weight-name", default=tensorarchive.DEFAULT_WEIGHT_NAME)
    p.add_argument("--bias-name", default=tensorarchive.DEFAULT_BIAS_NAME)
    p.add_argument("--patch-size", type=int, default=None, metavar="P")
    p.add_argument(
        "--norm-mean", type=float, default=0.5, help="scalar mean (default: 0.5)"
    )
    p.add_argument(
        "--norm-std", type=float, default=0.5, help="scalar std (default: 0.5)"
    )
    p.add_argument(
        "--dump-tokens",
        metavar="FILE",
        default=None,
        help="also write both token grids to a .safetensors file",
    )
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("eval", help="aAcc/mAcc/mIoU between two label-map trees")
    p.add_argument("--gt", required=True, metavar="DIR", help="ground-truth .pgm dir")
    p.add_argument("--pred", required=True, metavar="DIR", help="prediction .pgm dir")
    p.add_argument("--classes", type=int, required=True, metavar="K")
    p.add_argument(
        "--ignore",
        type=int,
        default=255,
        help="ground-truth label excluded from counts (default: 255)",
    )
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("inspect", help="print an archive's header summary")
    p.add_argument("--in", dest="input", required=True, metavar="FILE")
    p.set_defaults(func=_cmd_inspect)

    return parser


def _resolve_key(args) -> SecretKey:
    if args.key:
        return read_key_file(Path(args.key))
    env = os.environ.get(KEY_ENV_VAR)
    if env:
        return parse_key(env.strip())
    raise UsageError(f"no key given: pass --key FILE or set ${KEY_ENV_VAR}")


def _cmd_keygen(args) -> int:
    path = Path(args.out)
    if path.exists() and not args.force:
        print(f"error: {path} exists; use --force to overwrite", file=sys.stderr)
        return 2
    write_key_file(path, keygen())
    print(f"wrote {path}")
    return 0


def _transform_file(src: Path, dst: Path, key: SecretKey, patch: int, op) -> None:
    img = read_ppm(src.read_bytes())
    dst.write_bytes(write_ppm(op(img, key, patch)))


def _run_codec(args, op) -> int:
    key = _resolve_key(args)
    src = Path(args.input)
    dst = Path(args.output)
    if src.is_dir():
        files = sorted(src.glob("*.ppm"))
        if not files:
            print(f"error: no .ppm files in {src}", file=sys.stderr)
            return 2
        dst.mkdir(parents=True, exist_ok=True)
        failures = 0
        for f in files:
            try:
                _transform_file(f, dst / f.name, key, args.patch_size, op)
            except _DATA_ERRORS as exc:
                print(f"error: {f}: {exc}", file=sys.stderr)
                failures += 1
        return 2 if failures else 0
    try:
        _transform_file(src, dst, key, args.patch_size, op)
    except _DATA_ERRORS as exc:
        print(f"error: {src}: {exc}", file=sys.stderr)
        return 2
    return 0


def _cmd_encrypt(args) -> int:
    return _run_codec(args, encrypt_image)


def _cmd_decrypt(args) -> int:
    return _run_codec(args, decrypt_image)


def _cmd_adapt_model(args) -> int:
    key = _resolve_key(args)
    src = Path(args.input)
    archive = read_archive(src.read_bytes())
    adapted = adapt_archive(
        archive,
        key,
        weight_name=args.weight_name,
        bias_name=args.bias_name,
        patch_size=args.patch_size,
    )
    Path(args.output).write_bytes(write_archive(adapted))
    print(f"wrote {args.output}")
    return 0


def _cmd_verify(args) -> int:
    key = _resolve_key(args)
    archive = read_archive(Path(args.model).read_bytes())
    pe = load_patch_embedding(
        archive,
        weight_name=args.weight_name,
        bias_name=args.bias_name,
        patch_size=args.patch_size,
        norm_mean=args.norm_mean,
        norm_std=args.norm_std,
    )
    img = read_ppm(Path(args.image).read_bytes())
    report = verify_equivariance(pe, key, img, tol=args.tol)
    if args.dump_tokens:
        from .embedding import adapt_embedding, embed_forward

        plain = embed_forward(pe, img)
        adapted = embed_forward(
            adapt_embedding(pe, key), encrypt_image(img, key, pe.patch_size)
        )
        dump = tensorarchive.TensorArchive(
            [
                record_from_array("tokens.plain", plain.tokens),
                record_from_array("tokens.adapted_encrypted", adapted.tokens),
            ],
            {"patchcrypt.patch_size": str(pe.patch_size)},
        )
        Path(args.dump_tokens).write_bytes(write_archive(dump))
    print(report.to_json())
    return 0 if report.passed else 3


def _cmd_eval(args) -> int:
    gt_dir = Path(args.gt)
    pred_dir = Path(args.pred)
    gt_files = {f.stem: f for f in sorted(gt_dir.glob("*.pgm"))}
    pred_files = {f.stem: f for f in sorted(pred_dir.glob("*.pgm"))}
    if not gt_files:
        print(f"error: no .pgm files in {gt_dir}", file=sys.stderr)
        return 2
    if gt_files.keys() != pred_files.keys():
        only_gt = sorted(gt_files.keys() - pred_files.keys())
        only_pred = sorted(pred_files.keys() - gt_files.keys())
        print(
            f"error: file stems differ between --gt and --pred "
            f"(gt only: {only_gt}, pred only: {only_pred})",
            file=sys.stderr,
        )
        return 2

    cm = segmetrics.ConfusionMatrix.zeros(args.classes)
    for stem in sorted(gt_files):
        try:
            gt = read_pgm_labels(gt_files[stem].read_bytes())
            pred = read_pgm_labels(pred_files[stem].read_bytes())
            cm = segmetrics.accumulate(cm, gt, pred, ignore=args.ignore)
        except _DATA_ERRORS as exc:
            print(f"error: {stem}: {exc}", file=sys.stderr)
            return 2
    report = segmetrics.compute(cm)

    def fmt(v):
        return f"{v:7.2f}" if v is not None else "    n/a"

    print(f"{'class':>5}  {'IoU':>7}  {'Acc':>7}")
    for i in range(args.classes):
        print(f"{i:>5}  {fmt(report.per_class_iou[i])}  {fmt(report.per_class_acc[i])}")
    print(
        f"aAcc {report.aAcc:.2f}  mAcc {report.mAcc:.2f}  mIoU {report.mIoU:.2f}"
    )
    print(
        json.dumps(
            {
                "aAcc": report.aAcc,
                "mAcc": report.mAcc,
                "mIoU": report.mIoU,
                "per_class_iou": list(report.per_class_iou),
                "per_class_acc": list(report.per_class_acc),
            }
        )
    )
    return 0


def _cmd_inspect(args) -> int:
    data = Path(args.input).read_bytes()
    archive = read_archive(data)
    print(f"archive: {args.input}")
    print(f"tensors: {len(archive.records)}")
    for rec in archive.records:
        nbytes = rec.element_count() * DTYPE_SIZES[rec.dtype]
        print(f"  {rec.name}  {rec.dtype}  {list(rec.shape)}  {nbytes} bytes")
    if archive.metadata:
        print("metadata:")
        for k, v in sorted(archive.metadata.items()):
            print(f"  {k} = {v}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
