"""Flat binary checkpoints plus a JSON sidecar describing the model.

Binary layout (all integers little-endian uint32):

    magic "IFSNET1" | tensor count
    per tensor: name length | UTF-8 name | rank | dims... | float32 LE data

The sidecar (<path>.json) records the architecture config and, when the
model was trained on encoded input, the membership/negation configs, so
evaluation can reapply the exact input transform.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import IfsnetError
from .ifs import MembershipConfig, NegationConfig
from .nets import ArchConfig, ModelGraph, build

MAGIC = b"IFSNET1"


def save_checkpoint(path, arrays: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            encoded = name.encode("utf-8")
            data = np.ascontiguousarray(arr, dtype="<f4")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(data.tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise IfsnetError(f"{path}: not an IFSNET1 checkpoint")
        (count,) = struct.unpack("<I", fh.read(4))
        arrays: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", fh.read(4))
            dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
            n = int(np.prod(dims)) if rank else 1
            raw = fh.read(4 * n)
            if len(raw) != 4 * n:
                raise IfsnetError(f"{path}: truncated tensor {name!r}")
            arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    return arrays


def _sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def save_model(path, model: ModelGraph,
               encode: tuple[MembershipConfig, NegationConfig] | None = None) -> None:
    save_checkpoint(path, model.state_arrays())
    sidecar = {
        "arch": asdict(model.config),
        "encode": None if encode is None else {
            "membership": asdict(encode[0]),
            "negation": asdict(encode[1]),
        },
    }
    with open(_sidecar_path(path), "w") as fh:
        json.dump(sidecar, fh, indent=2)


def load_model(path) -> tuple[ModelGraph, tuple[MembershipConfig, NegationConfig] | None]:
    with open(_sidecar_path(path)) as fh:
        sidecar = json.load(fh)
    cfg = ArchConfig(**sidecar["arch"])
    model = build(cfg, seed=0)
    arrays = load_checkpoint(path)
    missing = set(model.state_arrays()) - set(arrays)
    if missing:
        raise IfsnetError(f"{path}: checkpoint missing tensors {sorted(missing)}")
    model.restore(arrays)
    encode = None
    if sidecar.get("encode"):
        encode = (MembershipConfig(**sidecar["encode"]["membership"]),
                  NegationConfig(**sidecar["encode"]["negation"]))
    return model, encode
