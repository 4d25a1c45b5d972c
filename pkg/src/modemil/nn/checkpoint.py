"""Named-tensor archive used for model checkpoints and cached features.

The container is a numpy ``.npz`` file with one entry per named array plus a
reserved ``__meta__`` entry holding a JSON document::

    {"format": "modemil-tensors", "version": 1, "meta": {...}}

Array names, shapes and dtypes are self-describing through the npz index;
``meta`` carries caller-supplied metadata (config, seed, provenance).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = ["save_arrays", "load_arrays", "FORMAT_NAME", "FORMAT_VERSION"]

FORMAT_NAME = "modemil-tensors"
FORMAT_VERSION = 1
_META_KEY = "__meta__"


def save_arrays(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    if _META_KEY in arrays:
        raise ValueError(f"array name {_META_KEY!r} is reserved")
    header = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "meta": meta or {}}
    payload = {name: np.asarray(value) for name, value in arrays.items()}
    payload[_META_KEY] = np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, **payload)


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    with np.load(path) as archive:
        if _META_KEY not in archive:
            raise ValueError(f"{path}: not a {FORMAT_NAME} archive (missing header)")
        header = json.loads(bytes(archive[_META_KEY]).decode("utf-8"))
        if header.get("format") != FORMAT_NAME:
            raise ValueError(f"{path}: unexpected format {header.get('format')!r}")
        if header.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {header.get('version')!r}")
        arrays = {name: archive[name] for name in archive.files if name != _META_KEY}
    return arrays, header.get("meta", {})
