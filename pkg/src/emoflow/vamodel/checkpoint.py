"""Checkpoint archive: model weights as named arrays plus a JSON manifest.

A checkpoint is a zip holding ``manifest.json`` (format version, model
config, per-parameter shapes/dtypes, optional metadata) and one ``.npy``
entry per parameter/buffer.  Arrays round-trip bit-exactly.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from .networks import ModelConfig, VAModel

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(model: VAModel, path, version: str = "0",
                    metadata: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    state = model.state_dict()
    manifest = {
        "format_version": FORMAT_VERSION,
        "model_version": version,
        "config": asdict(model.cfg),
        "arrays": {name: {"shape": list(t.shape), "dtype": str(t.numpy().dtype)}
                   for name, t in state.items()},
        "metadata": metadata or {},
    }
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("manifest.json", json.dumps(manifest, indent=2))
        for name, tensor in state.items():
            buf = io.BytesIO()
            np.save(buf, tensor.detach().cpu().numpy(), allow_pickle=False)
            zf.writestr(f"arrays/{name}.npy", buf.getvalue())
    return path


def load_manifest(path) -> dict:
    with zipfile.ZipFile(path) as zf:
        return json.loads(zf.read("manifest.json"))


def load_checkpoint(path) -> tuple[VAModel, dict]:
    """Rebuild the model from an archive; weights reload bit-exactly."""
    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json"))
        if manifest.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(
                f"unsupported checkpoint format {manifest.get('format_version')}")
        cfg_dict = dict(manifest["config"])
        for key in ("conv_kernel", "conv_stride", "pool_kernel"):
            cfg_dict[key] = tuple(cfg_dict[key])
        model = VAModel(ModelConfig(**cfg_dict))
        state = {}
        for name, info in manifest["arrays"].items():
            arr = np.load(io.BytesIO(zf.read(f"arrays/{name}.npy")), allow_pickle=False)
            if list(arr.shape) != info["shape"]:
                raise CheckpointError(f"array {name} has shape {arr.shape}, "
                                      f"manifest says {info['shape']}")
            state[name] = torch.from_numpy(arr)
        missing = set(model.state_dict()) - set(state)
        if missing:
            raise CheckpointError(f"checkpoint is missing arrays: {sorted(missing)[:5]}")
        model.load_state_dict(state)
    model.eval()
    return model, manifest
