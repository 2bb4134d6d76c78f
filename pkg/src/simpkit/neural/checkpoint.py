"""Versioned binary checkpoints for ParamStore contents.

Layout: one magic+version text line, one JSON header line (names, shapes,
dtype, seed, caller metadata), then each named array as a raw .npy blob in
header order. Writes are atomic and the format round-trips bitwise.
"""

from __future__ import annotations

import io
import json
import os

import numpy as np

from ..errors import ParseError, ShapeError
from .params import ParamStore

MAGIC = b"SIMPKIT-CHECKPOINT"
FORMAT_VERSION = 1


def save_checkpoint(path: str, store: ParamStore, meta: dict | None = None) -> None:
    """Serialize every parameter plus metadata; meta must be JSON-safe and
    must not contain volatile values (timestamps break reproducibility)."""
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(checkpoint_bytes(store, meta))
    os.replace(tmp, path)


def load_checkpoint(path: str) -> tuple[ParamStore, dict]:
    """Rebuild the store and return (store, meta)."""
    with open(path, "rb") as f:
        first = f.readline()
        if not first.startswith(MAGIC):
            raise ParseError(f"{path}: not a checkpoint file", line_number=1)
        if first.strip() != MAGIC + b" v%d" % FORMAT_VERSION:
            raise ParseError(f"{path}: unsupported version {first.strip()!r}", line_number=1)
        try:
            header = json.loads(f.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ParseError(f"{path}: bad checkpoint header: {e}", line_number=2) from None
        store = ParamStore(seed=header["seed"], dtype=header["dtype"])
        for name in header["names"]:
            arr = np.load(f, allow_pickle=False)
            if list(arr.shape) != header["shapes"][name]:
                raise ShapeError(f"{name}: stored shape {arr.shape} != header")
            store.add(name, arr)
    return store, header["meta"]


def checkpoint_bytes(store: ParamStore, meta: dict | None = None) -> bytes:
    """The exact byte string save_checkpoint would write (for digesting)."""
    buf = io.BytesIO()
    names = store.names()
    header = {
        "version": FORMAT_VERSION,
        "dtype": store.dtype.name,
        "seed": store.seed,
        "names": names,
        "shapes": {n: list(store[n].data.shape) for n in names},
        "meta": meta or {},
    }
    buf.write(MAGIC + b" v%d\n" % FORMAT_VERSION)
    buf.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
    for name in names:
        np.save(buf, store[name].data, allow_pickle=False)
    return buf.getvalue()
