"""``CFW1`` weight container.

Layout (little-endian)::

    b"CFW1" | u32 count | count x (u16 name_len | name utf-8 | u32 rows | u32 cols | f64[rows*cols])

Hyperparameters go to a JSON sidecar at ``<path>.json``.
"""

import hashlib
import json
import struct

import numpy as np

MAGIC = b"CFW1"


class WeightFormatError(ValueError):
    pass


def encode_weights(tensors):
    parts = [MAGIC, struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        a = np.asarray(arr, dtype="<f8")
        if a.ndim == 1:
            a = a.reshape(1, -1)
        if a.ndim != 2:
            raise WeightFormatError(f"{name}: tensors must be 2-D")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<II", *a.shape))
        parts.append(np.ascontiguousarray(a).tobytes())
    return b"".join(parts)


def decode_weights(blob):
    if blob[:4] != MAGIC:
        raise WeightFormatError("bad magic; not a CFW1 file")
    (count,) = struct.unpack_from("<I", blob, 4)
    pos = 8
    out = {}
    for _ in range(count):
        (ln,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos:pos + ln].decode("utf-8")
        pos += ln
        rows, cols = struct.unpack_from("<II", blob, pos)
        pos += 8
        nbytes = rows * cols * 8
        if pos + nbytes > len(blob):
            raise WeightFormatError(f"truncated payload for {name}")
        out[name] = np.frombuffer(blob, dtype="<f8", count=rows * cols, offset=pos).reshape(rows, cols).astype(np.float64)
        pos += nbytes
    if pos != len(blob):
        raise WeightFormatError("trailing bytes after last tensor")
    return out


def save_weights(path, tensors, hyper=None):
    blob = encode_weights(tensors)
    with open(path, "wb") as fh:
        fh.write(blob)
    with open(f"{path}.json", "w", encoding="utf-8") as fh:
        json.dump(hyper or {}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return hashlib.sha256(blob).hexdigest()


def load_weights(path):
    with open(path, "rb") as fh:
        tensors = decode_weights(fh.read())
    try:
        with open(f"{path}.json", encoding="utf-8") as fh:
            hyper = json.load(fh)
    except FileNotFoundError:
        hyper = {}
    return tensors, hyper


def weights_hash(tensors):
    return hashlib.sha256(encode_weights(tensors)).hexdigest()
