"""Versioned ``.npz`` envelope for parameters, replay contents and the like.

Every file holds a JSON header under ``__meta__`` (format version, payload
kind, free-form metadata) plus named float/int arrays. Arrays are stored
losslessly, so a save/load cycle is bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .net import CriticParams, Params, PolicyParams

FORMAT_VERSION = 1


class CheckpointError(IOError):
    pass


def save_envelope(path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> Path:
    path = Path(path)
    header = json.dumps({"version": FORMAT_VERSION, "kind": kind, "meta": meta})
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(header), **arrays)
    return path


def load_envelope(path, kind: str | None = None) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["__meta__"]))
            arrays = {k: data[k] for k in data.files if k != "__meta__"}
    except (OSError, ValueError, KeyError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if header.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {header.get('version')}")
    if kind is not None and header.get("kind") != kind:
        raise CheckpointError(f"{path}: expected a {kind!r} checkpoint, found {header.get('kind')!r}")
    return header["meta"], arrays


def save_params(path, params: Params, **meta) -> Path:
    kind = "critic" if isinstance(params, CriticParams) else "actor"
    return save_envelope(path, kind, {"sizes": list(params.sizes), "role": kind, **meta},
                         {"flat": params.flat})


def load_params(path) -> Params:
    meta, arrays = load_envelope(path)
    cls = CriticParams if meta.get("role") == "critic" else PolicyParams
    try:
        return cls(arrays["flat"].astype(np.float64), tuple(meta["sizes"]))
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed parameter payload ({exc})") from exc


def load_actor(path) -> PolicyParams:
    params = load_params(path)
    if not isinstance(params, PolicyParams):
        raise CheckpointError(f"{path} does not hold an actor")
    return params
