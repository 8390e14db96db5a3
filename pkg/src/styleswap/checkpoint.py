"""Checkpoint container: one JSON header plus raw float32 payload.

Layout: 8 bytes little-endian unsigned header length, then UTF-8 JSON,
then the arrays named by the header's ``entries`` list, each raw
little-endian float32 in C order, concatenated in header order.

The header carries arbitrary JSON metadata (iteration counters, RNG
states, configs); Python's json round-trips the big integers inside numpy
bit-generator state dicts exactly, so save->load->save is byte-identical.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Union

import numpy as np

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """File is not a well-formed checkpoint container."""


def save_container(path: Union[str, Path], meta: dict,
                   arrays: dict[str, np.ndarray]) -> None:
    """Write metadata and named float32 arrays; insertion order is kept."""
    entries = []
    offset = 0
    blobs = []
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype="<f4")
        if arr.ndim:
            arr = np.ascontiguousarray(arr)
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blob = arr.tobytes()
        blobs.append(blob)
        offset += len(blob)
    header = dict(meta)
    header["format_version"] = FORMAT_VERSION
    header["entries"] = entries
    header_bytes = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for blob in blobs:
            fh.write(blob)


def load_container(path: Union[str, Path]) -> tuple[dict, dict[str, np.ndarray]]:
    """Read back (meta, arrays); arrays come out float32 in header order."""
    with open(path, "rb") as fh:
        raw_len = fh.read(8)
        if len(raw_len) != 8:
            raise CheckpointError("truncated header length field")
        (header_len,) = struct.unpack("<Q", raw_len)
        header_bytes = fh.read(header_len)
        if len(header_bytes) != header_len:
            raise CheckpointError("truncated header")
        try:
            header = json.loads(header_bytes.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"malformed header: {exc}") from None
        if header.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(
                f"unsupported format_version {header.get('format_version')!r}")
        entries = header.pop("entries", None)
        if entries is None:
            raise CheckpointError("header missing entries list")
        payload = fh.read()
    arrays = {}
    for entry in entries:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + 4 * count
        if end > len(payload):
            raise CheckpointError(f"truncated payload for entry {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(
            payload[start:end], dtype="<f4").reshape(shape).copy()
    return header, arrays
