"""Model checkpoint file: magic "MXP1", JSON header, float64 LE param blobs.

Layout: magic (4 bytes), u32 version, u32 header length, UTF-8 JSON header
{"params": [{"name", "shape"}...], "meta": {...}}, then the raw value blobs
in header order. Loading restores bit-identical values.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = b"MXP1"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, values: dict[str, np.ndarray], meta: dict) -> None:
    entries = [
        {"name": name, "shape": list(arr.shape)} for name, arr in values.items()
    ]
    header = json.dumps(
        {"params": entries, "meta": meta}, separators=(",", ":")
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(header)))
        fh.write(header)
        for arr in values.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{Path(path).name}: bad magic {raw[:4]!r}")
    version, header_len = struct.unpack_from("<II", raw, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos = 12
    header = json.loads(raw[pos : pos + header_len].decode("utf-8"))
    pos += header_len

    values: dict[str, np.ndarray] = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        blob = raw[pos : pos + nbytes]
        if len(blob) != nbytes:
            raise CheckpointError(f"truncated blob for param '{entry['name']}'")
        values[entry["name"]] = (
            np.frombuffer(blob, dtype="<f8").reshape(shape).copy()
        )
        pos += nbytes
    return header["meta"], values
