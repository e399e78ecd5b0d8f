"""Parameter checkpoint files.

Layout: one JSON manifest line (block names, shapes, dtype, store
version, free-form metadata) terminated by a newline, followed by the
raw little-endian array bytes concatenated in manifest order.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .params import ParameterStore

MAGIC = "deskrl-ckpt-v1"

_DTYPES = {"float32": "<f4", "float64": "<f8"}


def save_checkpoint(path, blocks: dict[str, np.ndarray] | ParameterStore,
                    meta: dict | None = None, version: int | None = None):
    if isinstance(blocks, ParameterStore):
        version = blocks.version if version is None else version
        blocks = blocks.snapshot()
    names = sorted(blocks)
    dtype = str(next(iter(blocks.values())).dtype) if blocks else "float32"
    manifest = {
        "magic": MAGIC,
        "version": int(version or 0),
        "dtype": dtype,
        "blocks": [{"name": n, "shape": list(blocks[n].shape)} for n in names],
        "meta": meta or {},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(json.dumps(manifest, sort_keys=True).encode() + b"\n")
        for n in names:
            f.write(np.ascontiguousarray(blocks[n], dtype=_DTYPES[dtype]).tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Returns (blocks, manifest). Blocks come back in native byte order."""
    with open(path, "rb") as f:
        header = f.readline()
        manifest = json.loads(header)
        if manifest.get("magic") != MAGIC:
            raise ValueError(f"{path}: not a deskrl checkpoint")
        dtype = np.dtype(_DTYPES[manifest["dtype"]])
        blocks = {}
        for entry in manifest["blocks"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = f.read(count * dtype.itemsize)
            if len(raw) != count * dtype.itemsize:
                raise ValueError(f"{path}: truncated block {entry['name']!r}")
            blocks[entry["name"]] = np.frombuffer(raw, dtype=dtype).reshape(shape).astype(
                manifest["dtype"], copy=True)
    return blocks, manifest
