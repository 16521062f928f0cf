"""Versioned model checkpoints.

A checkpoint is a zip archive holding ``meta.json`` (format version, model
config, vocabulary, seed, free-form metadata) and one ``.npy`` member per
tensor under ``params/`` and ``ema/``. Tensors are float64 little-endian.
Members are written in sorted order with a fixed timestamp so identical
contents give identical bytes.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .model import ModelConfig, param_shapes

FORMAT_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict[str, np.ndarray]
    ema: dict[str, np.ndarray]
    seed: int
    meta: dict = field(default_factory=dict)


def _npy_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(arr, dtype="<f8"), allow_pickle=False)
    return buf.getvalue()


def _put(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> str:
    """Write ``ckpt`` and return the sha256 of the file."""
    header = {
        "format_version": FORMAT_VERSION,
        "config": ckpt.config.to_dict(),
        "vocab": list(ckpt.config.vocab),
        "seed": ckpt.seed,
        "meta": ckpt.meta,
    }
    with zipfile.ZipFile(path, "w") as zf:
        _put(zf, "meta.json", json.dumps(header, sort_keys=True, indent=1).encode("utf-8"))
        for group, tensors in (("params", ckpt.params), ("ema", ckpt.ema)):
            for name in sorted(tensors):
                _put(zf, f"{group}/{name}.npy", _npy_bytes(tensors[name]))
    return file_sha256(path)


def load_checkpoint(path: str | Path) -> Checkpoint:
    try:
        zf = zipfile.ZipFile(path)
    except (OSError, zipfile.BadZipFile) as exc:
        raise ConfigError(f"cannot open checkpoint {path}: {exc}") from exc
    with zf:
        header = json.loads(zf.read("meta.json"))
        if header.get("format_version") != FORMAT_VERSION:
            raise ConfigError(f"unsupported checkpoint version {header.get('format_version')}")
        cfg = ModelConfig(vocab=tuple(header["vocab"]), **header["config"])
        groups: dict[str, dict[str, np.ndarray]] = {"params": {}, "ema": {}}
        for name in zf.namelist():
            if name == "meta.json":
                continue
            group, _, leaf = name.partition("/")
            groups[group][leaf[: -len(".npy")]] = np.lib.format.read_array(
                io.BytesIO(zf.read(name)), allow_pickle=False
            )
    shapes = param_shapes(cfg)
    for group in ("params", "ema"):
        got = {k: v.shape for k, v in groups[group].items()}
        if got != shapes:
            raise ConfigError(f"checkpoint {group} tensors do not match the model config")
    return Checkpoint(cfg, groups["params"], groups["ema"], header["seed"], header.get("meta", {}))


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
