"""Versioned binary model checkpoints.

Layout: magic ``PNCK`` | uint32 version | uint32 header length | header
JSON (model config + ordered array manifest with names and shapes) | raw
little-endian float32 data for each array in manifest order.  Parameters
and batch-norm running statistics are both captured.
"""
import json
import struct
from pathlib import Path

import numpy as np

from .resnet import ModelConfig, build_resnet

MAGIC = b"PNCK"
VERSION = 1


def save_checkpoint(model, path):
    arrays = list(model.state_arrays())
    header = {
        "model_config": model.cfg.to_dict(),
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_header(raw, path):
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    version, hlen = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(raw[12 : 12 + hlen].decode("utf-8"))
    return header, 12 + hlen


def peek_config(path):
    raw = Path(path).read_bytes()
    header, _ = _read_header(raw, path)
    return ModelConfig.from_dict(header["model_config"])


def load_checkpoint(path, build_seed=0):
    """Rebuild the model from the embedded config and load all arrays."""
    raw = Path(path).read_bytes()
    header, off = _read_header(raw, path)
    cfg = ModelConfig.from_dict(header["model_config"])
    model = build_resnet(cfg, seed=build_seed)
    current = dict(model.state_arrays())
    names = set()
    for entry in header["arrays"]:
        name, shape = entry["name"], tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(raw, dtype="<f4", count=count, offset=off)
        off += 4 * count
        if name not in current:
            raise ValueError(f"{path}: checkpoint array {name!r} not in model")
        if current[name].shape != shape:
            raise ValueError(
                f"{path}: array {name!r} shape {shape} != model shape {current[name].shape}"
            )
        current[name][...] = data.reshape(shape)
        names.add(name)
    missing = set(current) - names
    if missing:
        raise ValueError(f"{path}: checkpoint missing arrays {sorted(missing)}")
    return model
