"""Portable tensor container.

Layout: one UTF-8 JSON header line
``{"tensors": [{"name", "shape", "offset", "dtype": "f32le"}...], "meta": {...}}``
terminated by a newline, followed by the raw little-endian float32 payload.
Offsets are byte offsets into the payload. Round-trips preserve every
float32 bit-exactly.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ContainerError

__all__ = ["write_tensors", "read_tensors"]

DTYPE_TAG = "f32le"


def write_tensors(
    path: str | os.PathLike,
    tensors: Mapping[str, np.ndarray],
    meta: dict | None = None,
) -> None:
    """Write named tensors to ``path``. Values are stored as float32."""
    records = []
    chunks = []
    offset = 0
    for name, array in tensors.items():
        # asarray keeps 0-dim shapes intact; tobytes handles any layout.
        arr = np.asarray(array, dtype="<f4")
        records.append(
            {"name": name, "shape": list(arr.shape), "offset": offset, "dtype": DTYPE_TAG}
        )
        raw = arr.tobytes()
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps({"tensors": records, "meta": meta or {}}, ensure_ascii=False)
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(b"\n")
        for chunk in chunks:
            fh.write(chunk)


def read_tensors(path: str | os.PathLike) -> tuple[dict[str, np.ndarray], dict]:
    """Read a container; returns (name -> float32 array, meta)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise ContainerError(f"tensor container not found: {path}") from None
    except OSError as exc:
        raise ContainerError(f"cannot read tensor container {path}: {exc}") from exc

    newline = raw.find(b"\n")
    if newline < 0:
        raise ContainerError(f"{path}: missing header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"{path}: malformed header: {exc}") from exc
    if not isinstance(header, dict) or "tensors" not in header:
        raise ContainerError(f"{path}: header must be an object with a 'tensors' list")

    payload = raw[newline + 1 :]
    tensors: dict[str, np.ndarray] = {}
    for record in header["tensors"]:
        try:
            name = record["name"]
            shape = tuple(int(d) for d in record["shape"])
            offset = int(record["offset"])
            dtype = record["dtype"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ContainerError(f"{path}: malformed tensor record {record!r}") from exc
        if dtype != DTYPE_TAG:
            raise ContainerError(f"{path}: tensor '{name}' has unsupported dtype {dtype!r}")
        if name in tensors:
            raise ContainerError(f"{path}: duplicate tensor name '{name}'")
        count = 1
        for d in shape:
            if d < 0:
                raise ContainerError(f"{path}: tensor '{name}' has negative dimension")
            count *= d
        end = offset + 4 * count
        if offset < 0 or end > len(payload):
            raise ContainerError(
                f"{path}: tensor '{name}' spans bytes [{offset}, {end}) but payload has "
                f"{len(payload)} bytes"
            )
        tensors[name] = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(shape)
    meta = header.get("meta", {})
    if not isinstance(meta, dict):
        raise ContainerError(f"{path}: 'meta' must be an object")
    return tensors, meta
