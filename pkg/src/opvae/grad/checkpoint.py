"""JSON parameter checkpoints.

Layout::

    {"format": "grad_core_ckpt_v1",
     "params": {name: {"shape": [...], "values": [...]}},
     "meta": {...}}
"""
from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

FORMAT = "grad_core_ckpt_v1"


class CheckpointError(ValueError):
    pass


def encode_arrays(arrays: dict[str, np.ndarray]) -> dict:
    return {
        name: {"shape": list(np.shape(a)), "values": np.asarray(a, dtype=np.float64).reshape(-1).tolist()}
        for name, a in arrays.items()
    }


def decode_arrays(blob: dict) -> dict[str, np.ndarray]:
    out = {}
    for name, entry in blob.items():
        shape = tuple(entry["shape"])
        values = np.asarray(entry["values"], dtype=np.float64)
        if values.size != int(np.prod(shape)):
            raise CheckpointError(f"{name}: {values.size} values for shape {shape}")
        out[name] = values.reshape(shape)
    return out


def save_checkpoint(path, params: dict[str, np.ndarray], meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"format": FORMAT, "params": encode_arrays(params), "meta": meta or {}}
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)
    return path


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT:
        raise CheckpointError(f"{path}: expected format {FORMAT!r}, found {doc.get('format')!r}")
    return decode_arrays(doc["params"]), doc.get("meta", {})
