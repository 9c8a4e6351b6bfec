"""Self-describing binary tensor container.

Layout (all integers little-endian)::

    bytes 0..7    magic  b"QAEPPTC\\x00"
    bytes 8..11   uint32 header length H
    bytes 12..    H bytes of UTF-8 JSON header (sorted keys, compact separators)
    then          raw C-order array payloads, back to back

The header is ``{"format_version": 1, "meta": {...}, "arrays": [{"name",
"dtype", "shape", "offset", "nbytes"}, ...]}`` where ``offset`` counts from
the start of the payload section. Writing the same arrays and metadata always
produces the same bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"QAEPPTC\x00"
FORMAT_VERSION = 1


class ContainerError(ValueError):
    pass


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_container(path, arrays: Mapping[str, np.ndarray], meta: Mapping | None = None) -> Path:
    path = Path(path)
    entries, payloads, offset = [], [], 0
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        raw = arr.tobytes()
        entries.append(
            {"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)}
        )
        payloads.append(raw)
        offset += len(raw)
    header = dumps_json({"format_version": FORMAT_VERSION, "meta": dict(meta or {}), "arrays": entries}).encode()
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for raw in payloads:
            fh.write(raw)
    return path


def read_container(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    if not path.exists():
        raise ContainerError(f"{path}: file not found")
    data = path.read_bytes()
    if data[:8] != MAGIC:
        raise ContainerError(f"{path}: not a tensor container")
    (hlen,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12 : 12 + hlen])
    if header.get("format_version") != FORMAT_VERSION:
        raise ContainerError(f"{path}: unsupported format version {header.get('format_version')}")
    base = 12 + hlen
    arrays = {}
    for e in header["arrays"]:
        start = base + e["offset"]
        chunk = data[start : start + e["nbytes"]]
        if len(chunk) != e["nbytes"]:
            raise ContainerError(f"{path}: truncated payload for {e['name']}")
        arrays[e["name"]] = np.frombuffer(chunk, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    return arrays, header["meta"]


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def array_sha256(*arrays: np.ndarray) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()
