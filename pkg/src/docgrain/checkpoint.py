"""Binary checkpoint format.

Layout: magic bytes ``MMLY1``, a little-endian uint32 header length, a JSON
header (tensor names, shapes, byte offsets, config snapshot), then the raw
little-endian float64 payloads back to back. Round trips are bit-exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"MMLY1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path: str, tensors: dict[str, np.ndarray], config: dict) -> None:
    entries = []
    offset = 0
    blobs = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f8")
        blob = arr.tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(blob)})
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({"tensors": entries, "config": config}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic bytes, not a checkpoint")
    pos = len(MAGIC)
    (hlen,) = struct.unpack("<I", raw[pos : pos + 4])
    pos += 4
    try:
        header = json.loads(raw[pos : pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from None
    pos += hlen
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        start = pos + entry["offset"]
        blob = raw[start : start + entry["nbytes"]]
        if len(blob) != entry["nbytes"]:
            raise CheckpointError(f"{path}: truncated payload for tensor '{entry['name']}'")
        arr = np.frombuffer(blob, dtype="<f8").reshape(entry["shape"]).copy()
        tensors[entry["name"]] = arr
    return tensors, header["config"]
