"""Checkpoint persistence.

A checkpoint is a directory holding manifest.json plus params.bin. The
manifest records the model config and, per tensor, its shape, dtype, byte
offset and sha256; params.bin is the concatenation of all tensors as
little-endian float32 in manifest order. Any disagreement between manifest,
payload, and the shapes implied by the config is an integrity error.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from ..errors import CheckpointIntegrityError
from .config import ModelConfig
from .params import Model, init_model

FORMAT_VERSION = 1
_DTYPE = np.dtype("<f4")


def save_checkpoint(model: Model, path: str | Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    tensors = []
    offset = 0
    with open(path / "params.bin", "wb") as fh:
        for name, arr in model.all_params():
            data = np.ascontiguousarray(arr, dtype=_DTYPE).tobytes()
            fh.write(data)
            tensors.append({
                "name": name,
                "shape": list(arr.shape),
                "dtype": "float32",
                "offset": offset,
                "nbytes": len(data),
                "sha256": hashlib.sha256(data).hexdigest(),
            })
            offset += len(data)
    manifest = {"format_version": FORMAT_VERSION, "config": model.cfg.to_json(),
                "tensors": tensors}
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def load_checkpoint(path: str | Path) -> Model:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise CheckpointIntegrityError(f"missing manifest: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointIntegrityError(f"unsupported format_version: {manifest.get('format_version')}")
    cfg = ModelConfig.from_json(manifest["config"])

    blob = (path / "params.bin").read_bytes()
    entries = {t["name"]: t for t in manifest["tensors"]}
    expected_size = sum(t["nbytes"] for t in manifest["tensors"])
    if len(blob) != expected_size:
        raise CheckpointIntegrityError(
            f"params.bin is {len(blob)} bytes, manifest declares {expected_size}")

    # skeleton model supplies the expected tensor names and shapes for cfg
    model = init_model(cfg, seed=0)
    expected = dict(model.all_params())
    if set(entries) != set(expected):
        missing = sorted(set(expected) - set(entries))
        extra = sorted(set(entries) - set(expected))
        raise CheckpointIntegrityError(f"tensor set mismatch; missing={missing} extra={extra}")

    loaded: dict[str, np.ndarray] = {}
    for name, arr in expected.items():
        t = entries[name]
        if tuple(t["shape"]) != arr.shape:
            raise CheckpointIntegrityError(
                f"tensor {name}: manifest shape {t['shape']} != config-implied {list(arr.shape)}")
        nbytes = int(np.prod(t["shape"])) * _DTYPE.itemsize
        if t["nbytes"] != nbytes:
            raise CheckpointIntegrityError(f"tensor {name}: nbytes {t['nbytes']} != {nbytes}")
        data = blob[t["offset"]:t["offset"] + t["nbytes"]]
        if len(data) != t["nbytes"]:
            raise CheckpointIntegrityError(f"tensor {name}: payload truncated")
        if hashlib.sha256(data).hexdigest() != t["sha256"]:
            raise CheckpointIntegrityError(f"tensor {name}: checksum mismatch")
        loaded[name] = np.frombuffer(data, dtype=_DTYPE).reshape(arr.shape).astype(cfg.dtype)

    _assign(model, loaded)
    return model


def _assign(model: Model, loaded: dict[str, np.ndarray]) -> None:
    model.embed = loaded["embed"]
    model.pos = loaded["pos"]
    for i, layer in enumerate(model.layers):
        for key, mat in layer.adapted().items():
            mat.base = loaded[f"layers.{i}.{key}.base"]
            mat.lora_a = loaded[f"layers.{i}.{key}.lora_a"]
            mat.lora_b = loaded[f"layers.{i}.{key}.lora_b"]
        for key in ("ln1_g", "ln1_b", "ln2_g", "ln2_b"):
            setattr(layer, key, loaded[f"layers.{i}.{key}"])
    model.lnf_g = loaded["lnf_g"]
    model.lnf_b = loaded["lnf_b"]
    model.heads.w_ctr1 = loaded["heads.w_ctr1"]
    model.heads.w_ctr2 = loaded["heads.w_ctr2"]
    model.heads.w_qa = loaded["heads.w_qa"]
