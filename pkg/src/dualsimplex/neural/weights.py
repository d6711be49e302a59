"""Weight files.

Binary layout (little-endian)::

    magic   4 bytes  b"DSNW"
    version u32
    spec    u32 length + utf-8 text  (e.g. "4-128-1:tanh,tanh")
    meta    u32 length + utf-8 JSON  (training seed, population, ...)
    count   u64
    values  count * float64
    sha256  32 bytes over everything above
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .mlp import MlpSpec, param_count

MAGIC = b"DSNW"
LAYOUT_VERSION = 1


class WeightFileError(ValueError):
    pass


class ChecksumError(WeightFileError):
    pass


def _check_len(spec: MlpSpec, w: np.ndarray) -> None:
    if w.ndim != 1 or w.size != param_count(spec):
        raise WeightFileError(f"vector length {w.size} does not match {spec.describe()} ({param_count(spec)} params)")
    if not np.all(np.isfinite(w)):
        raise WeightFileError("non-finite weights")


def save_weights(path, spec: MlpSpec, w, meta: dict | None = None) -> None:
    w = np.ascontiguousarray(w, dtype="<f8")
    _check_len(spec, w)
    spec_b = spec.describe().encode()
    meta_b = json.dumps(meta or {}, sort_keys=True).encode()
    body = b"".join([
        MAGIC,
        struct.pack("<I", LAYOUT_VERSION),
        struct.pack("<I", len(spec_b)), spec_b,
        struct.pack("<I", len(meta_b)), meta_b,
        struct.pack("<Q", w.size),
        w.tobytes(),
    ])
    Path(path).write_bytes(body + hashlib.sha256(body).digest())


def load_weights(path, with_meta: bool = False):
    """(spec, w) or (spec, w, meta) from a weight file."""
    data = Path(path).read_bytes()
    if len(data) < 32 + 4 or data[:4] != MAGIC:
        raise WeightFileError(f"{path}: not a weight file")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch")
    try:
        (version,) = struct.unpack_from("<I", body, 4)
        if version != LAYOUT_VERSION:
            raise WeightFileError(f"unsupported layout version {version}")
        k = 8
        (ls,) = struct.unpack_from("<I", body, k)
        spec = MlpSpec.parse(body[k + 4:k + 4 + ls].decode())
        k += 4 + ls
        (lm,) = struct.unpack_from("<I", body, k)
        meta = json.loads(body[k + 4:k + 4 + lm].decode())
        k += 4 + lm
        (count,) = struct.unpack_from("<Q", body, k)
        k += 8
        if len(body) - k != 8 * count:
            raise WeightFileError("value block length disagrees with count")
        w = np.frombuffer(body, dtype="<f8", count=count, offset=k).astype(float)
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise WeightFileError(f"{path}: malformed header ({e})") from e
    _check_len(spec, w)
    return (spec, w, meta) if with_meta else (spec, w)


def export_text(path, spec: MlpSpec, w, meta: dict | None = None) -> None:
    """Human-readable dump: header comments then one value per line."""
    w = np.asarray(w, dtype=float)
    _check_len(spec, w)
    lines = [f"# spec {spec.describe()}", f"# params {w.size}", f"# meta {json.dumps(meta or {}, sort_keys=True)}"]
    lines += [repr(float(v)) for v in w]
    Path(path).write_text("\n".join(lines) + "\n")
