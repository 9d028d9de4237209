"""Bridge command line: export a patch embedding, or run the parity check.

Exit codes match the companion tool: 0 ok, 1 usage, 2 data error,
3 parity check failed.
"""

import argparse
import sys

from .export import BridgeError, export_patch_embed
from .netpbm import FormatError
from .parity import parity_check


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="patchcrypt-bridge",
        description="Pretrained embedding export and torch reference parity checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="write a patch-embedding .safetensors archive")
    p.add_argument(
        "--checkpoint", required=True,
        help="architecture id, e.g. vit_base_patch16_384",
    )
    p.add_argument("--out", required=True, metavar="FILE")
    p.add_argument(
        "--seed-init", type=int, default=None, metavar="N",
        help="skip the pretrained download; initialize with this seed",
    )
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("parity", help="compare the CLI against a torch forward pass")
    p.add_argument("--model", required=True, metavar="FILE")
    p.add_argument("--image", required=True, metavar="FILE", help="plain .ppm image")
    p.add_argument("--key", required=True, metavar="FILE")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument(
        "--channel-norm", action="store_true",
        help="normalize each channel separately (negative control; breaks "
        "the identity by design)",
    )
    p.add_argument("--workdir", default=None, help="keep intermediate files here")
    p.add_argument("--primary", default=None, help="path to the patchcrypt binary")
    p.set_defaults(func=_cmd_parity)
    return parser


def _cmd_export(args) -> int:
    summary = export_patch_embed(args.checkpoint, args.out, seed=args.seed_init)
    print(
        f"wrote {summary['out']}: {summary['source']} "
        f"(D={summary['dim']}, P={summary['patch_size']})"
    )
    return 0


def _cmd_parity(args) -> int:
    report = parity_check(
        args.model,
        args.image,
        args.key,
        tol=args.tol,
        channel_norm=args.channel_norm,
        workdir=args.workdir,
        primary=args.primary,
    )
    print(report.to_json())
    return 0 if report.passed else 3


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
    except (BridgeError, FormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
