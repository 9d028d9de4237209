"""Named-tensor container: 8-byte length, JSON header, raw buffer.

The layout matches the de-facto checkpoint container used by modern ML
tooling, so adapted weights can be exchanged with the ecosystem directly:

    [u64 LE header length N][N bytes JSON][raw little-endian buffer]

Each header entry maps a tensor name to {"dtype", "shape", "data_offsets"}
with offsets relative to the buffer; "__metadata__" optionally carries a
string map. The writer is canonical: tensors laid out in lexicographic
name order, contiguous from offset 0, compact JSON, no alignment padding,
which makes write(read(write(a))) byte-stable.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .keyschedule import SecretKey
from . import embedding

DTYPE_SIZES = {"F32": 4, "F64": 8, "I64": 8, "U8": 1}
_NUMPY_DTYPES = {"F32": "<f4", "F64": "<f8", "I64": "<i8", "U8": "u1"}

DEFAULT_WEIGHT_NAME = "patch_embed.proj.weight"
DEFAULT_BIAS_NAME = "patch_embed.proj.bias"


class ArchiveError(ValueError):
    """Malformed archive bytes or an operation on an incompatible archive."""


@dataclass(frozen=True)
class TensorRecord:
    """One named tensor: dtype, shape, and raw little-endian bytes."""

    name: str
    dtype: str
    shape: tuple[int, ...]
    data: bytes

    def __post_init__(self):
        if self.dtype not in DTYPE_SIZES:
            raise ArchiveError(f"unknown dtype {self.dtype!r} for tensor {self.name!r}")
        if any(e < 0 for e in self.shape):
            raise ArchiveError(f"negative extent in shape of tensor {self.name!r}")
        expected = self.element_count() * DTYPE_SIZES[self.dtype]
        if len(self.data) != expected:
            raise ArchiveError(
                f"tensor {self.name!r}: byte length {len(self.data)} does not "
                f"match dtype {self.dtype} x shape {list(self.shape)} "
                f"(expected {expected})"
            )

    def element_count(self) -> int:
        count = 1
        for e in self.shape:
            count *= e
        return count

    def to_array(self) -> np.ndarray:
        arr = np.frombuffer(self.data, dtype=_NUMPY_DTYPES[self.dtype])
        return arr.reshape(self.shape)


def record_from_array(name: str, arr: np.ndarray) -> TensorRecord:
    """Build a record from a numpy array (dtype mapped to F32/F64/I64/U8)."""
    by_kind = {"f4": "F32", "f8": "F64", "i8": "I64", "u1": "U8"}
    code = by_kind.get(arr.dtype.str.lstrip("<>=|"))
    if code is None:
        raise ArchiveError(f"unsupported array dtype {arr.dtype} for tensor {name!r}")
    le = arr.astype(_NUMPY_DTYPES[code], copy=False)
    return TensorRecord(name, code, tuple(int(e) for e in arr.shape), le.tobytes())


@dataclass
class TensorArchive:
    """Ordered records plus a string-to-string metadata map."""

    records: list[TensorRecord] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)

    def names(self) -> list[str]:
        return [r.name for r in self.records]

    def get(self, name: str) -> TensorRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise ArchiveError(f"tensor not found: {name!r}")


def _reject_duplicate_keys(pairs):
    seen = set()
    out = {}
    for k, v in pairs:
        if k in seen:
            raise ArchiveError(f"duplicate tensor name in header: {k!r}")
        seen.add(k)
        out[k] = v
    return out


def read_archive(data: bytes) -> TensorArchive:
    """Parse and fully validate archive bytes."""
    if len(data) < 8:
        raise ArchiveError(f"archive too short for header length ({len(data)} bytes)")
    (header_len,) = struct.unpack("<Q", data[:8])
    if 8 + header_len > len(data):
        raise ArchiveError(
            f"header length {header_len} overruns file of {len(data)} bytes"
        )
    try:
        header = json.loads(
            data[8 : 8 + header_len].decode("utf-8"),
            object_pairs_hook=_reject_duplicate_keys,
        )
    except ArchiveError:
        raise
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArchiveError(f"malformed JSON header: {exc}") from exc
    if not isinstance(header, dict):
        raise ArchiveError("JSON header must be an object")

    buffer = data[8 + header_len :]
    metadata_raw = header.pop("__metadata__", {})
    if not isinstance(metadata_raw, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in metadata_raw.items()
    ):
        raise ArchiveError("__metadata__ must be a string-to-string map")

    records = []
    spans = []
    for name, entry in header.items():
        if not isinstance(entry, dict):
            raise ArchiveError(f"tensor {name!r}: header entry must be an object")
        missing = {"dtype", "shape", "data_offsets"} - entry.keys()
        if missing:
            raise ArchiveError(f"tensor {name!r}: missing fields {sorted(missing)}")
        dtype = entry["dtype"]
        if dtype not in DTYPE_SIZES:
            raise ArchiveError(f"unknown dtype {dtype!r} for tensor {name!r}")
        shape = entry["shape"]
        if not isinstance(shape, list) or not all(
            isinstance(e, int) and not isinstance(e, bool) and e >= 0 for e in shape
        ):
            raise ArchiveError(f"tensor {name!r}: shape must be non-negative integers")
        offsets = entry["data_offsets"]
        if (
            not isinstance(offsets, list)
            or len(offsets) != 2
            or not all(isinstance(o, int) and not isinstance(o, bool) for o in offsets)
        ):
            raise ArchiveError(f"tensor {name!r}: data_offsets must be [begin, end]")
        begin, end = offsets
        if not (0 <= begin <= end <= len(buffer)):
            raise ArchiveError(
                f"tensor {name!r}: data_offsets [{begin}, {end}] out of range "
                f"for buffer of {len(buffer)} bytes"
            )
        records.append(TensorRecord(name, dtype, tuple(shape), buffer[begin:end]))
        spans.append((begin, end, name))

    spans.sort()
    cursor = 0
    for begin, end, name in spans:
        if begin != cursor:
            kind = "overlap" if begin < cursor else "gap"
            raise ArchiveError(
                f"buffer {kind} at offset {begin} (tensor {name!r}); "
                f"expected offset {cursor}"
            )
        cursor = end
    if cursor != len(buffer):
        raise ArchiveError(
            f"buffer has {len(buffer) - cursor} trailing bytes not covered "
            f"by any tensor"
        )
    return TensorArchive(records, dict(metadata_raw))


def write_archive(archive: TensorArchive) -> bytes:
    """Canonical serialization; two writes of equal archives are identical."""
    names = archive.names()
    if len(names) != len(set(names)):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise ArchiveError(f"duplicate tensor names: {dup}")

    ordered = sorted(archive.records, key=lambda r: r.name)
    header: dict = {}
    if archive.metadata:
        header["__metadata__"] = dict(sorted(archive.metadata.items()))
    cursor = 0
    chunks = []
    for rec in ordered:
        end = cursor + len(rec.data)
        header[rec.name] = {
            "dtype": rec.dtype,
            "shape": list(rec.shape),
            "data_offsets": [cursor, end],
        }
        chunks.append(rec.data)
        cursor = end
    header_bytes = json.dumps(header, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )
    return struct.pack("<Q", len(header_bytes)) + header_bytes + b"".join(chunks)


def _weight_geometry(rec: TensorRecord, patch_size: int | None) -> int:
    """Validate the weight record shape and return the patch size."""
    if rec.dtype != "F32":
        raise ArchiveError(
            f"weight tensor {rec.name!r} must be F32, got {rec.dtype}"
        )
    if len(rec.shape) == 4:
        d, c, p, q = rec.shape
        if c != 3:
            raise ArchiveError(
                f"weight tensor {rec.name!r}: expected 3 channels, got {c}"
            )
        if p != q or p < 1:
            raise ArchiveError(
                f"weight tensor {rec.name!r}: kernel must be square, got {p}x{q}"
            )
        if patch_size is not None and patch_size != p:
            raise ArchiveError(
                f"weight tensor {rec.name!r} has kernel size {p}, which "
                f"contradicts the requested patch size {patch_size}"
            )
        return p
    if len(rec.shape) == 2:
        if patch_size is None:
            raise ArchiveError(
                f"weight tensor {rec.name!r} has flat shape {list(rec.shape)}; "
                f"an explicit patch size is required"
            )
        if rec.shape[1] != 3 * patch_size * patch_size:
            raise ArchiveError(
                f"weight tensor {rec.name!r}: {rec.shape[1]} columns do not "
                f"match 3*{patch_size}^2 = {3 * patch_size * patch_size}"
            )
        return patch_size
    raise ArchiveError(
        f"weight tensor {rec.name!r}: incompatible shape {list(rec.shape)}; "
        f"expected [D, 3, P, P] or [D, 3*P*P]"
    )


def load_patch_embedding(
    archive: TensorArchive,
    weight_name: str = DEFAULT_WEIGHT_NAME,
    bias_name: str = DEFAULT_BIAS_NAME,
    patch_size: int | None = None,
    norm_mean: float = embedding.DEFAULT_NORM_MEAN,
    norm_std: float = embedding.DEFAULT_NORM_STD,
) -> embedding.PatchEmbedding:
    """Pull the named weight/bias out of an archive as a PatchEmbedding.

    A missing bias tensor is treated as zeros; a present one must have
    shape [D].
    """
    rec = archive.get(weight_name)
    p = _weight_geometry(rec, patch_size)
    d = rec.shape[0]
    try:
        bias = archive.get(bias_name).to_array()
    except ArchiveError:
        bias = np.zeros(d, dtype=np.float32)
    if bias.shape != (d,):
        raise ArchiveError(
            f"bias tensor {bias_name!r}: expected shape [{d}], got "
            f"{list(bias.shape)}"
        )
    weight = rec.to_array().reshape(d, 3 * p * p)
    return embedding.PatchEmbedding(
        p, weight, bias.astype(np.float32), norm_mean, norm_std
    )


def adapt_archive(
    archive: TensorArchive,
    key: SecretKey,
    weight_name: str = DEFAULT_WEIGHT_NAME,
    bias_name: str = DEFAULT_BIAS_NAME,
    patch_size: int | None = None,
) -> TensorArchive:
    """Rewrite only the named patch-embedding weight with the key.

    Every other record is carried over byte-identical; metadata gains
    "patchcrypt.adapted" and "patchcrypt.patch_size". The key itself is
    never stored.
    """
    rec = archive.get(weight_name)
    p = _weight_geometry(rec, patch_size)
    d = rec.shape[0]

    pe = load_patch_embedding(archive, weight_name, bias_name, patch_size=p)
    adapted = embedding.adapt_embedding(pe, key)
    if len(rec.shape) == 4:
        new_data = embedding.to_conv_layout(adapted).astype("<f4").tobytes()
    else:
        new_data = adapted.weight.astype("<f4").tobytes()
    new_rec = TensorRecord(weight_name, "F32", rec.shape, new_data)

    records = [new_rec if r.name == weight_name else r for r in archive.records]
    metadata = dict(archive.metadata)
    metadata["patchcrypt.adapted"] = "true"
    metadata["patchcrypt.patch_size"] = str(p)
    return TensorArchive(records, metadata)
