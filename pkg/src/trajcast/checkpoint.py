"""Checkpoint container: a directory of raw parameter files plus a manifest.

The manifest is plain text, one declaration per line:

    format trajcast-checkpoint 1
    step <adam step counter>
    config <key> <value>          # every ModelConfig field
    param <name> <d0xd1x...> <filename>

Each parameter file holds the row-major little-endian float64 bytes of one
named parameter, so save -> load reproduces bit-identical forward passes.
"""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path

import numpy as np

from .errors import DataError
from .model import ForecastModel, ModelConfig

_FORMAT_LINE = "format trajcast-checkpoint 1"

_CONFIG_TYPES = {f.name: f.type for f in fields(ModelConfig)}


def _config_to_lines(cfg: ModelConfig) -> list[str]:
    lines = []
    for f in fields(ModelConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = int(value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"config {f.name} {value}")
    return lines


def _config_from_pairs(pairs: dict[str, str]) -> ModelConfig:
    kwargs = {}
    for name, typ in _CONFIG_TYPES.items():
        if name not in pairs:
            raise DataError(f"checkpoint manifest is missing config key {name!r}")
        raw = pairs[name]
        if typ == "bool":
            kwargs[name] = bool(int(raw))
        elif typ == "int":
            kwargs[name] = int(raw)
        elif typ == "float":
            kwargs[name] = float(raw)
        else:
            kwargs[name] = raw
    return ModelConfig(**kwargs)


def save_checkpoint(model: ForecastModel, path: str | Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    lines = [_FORMAT_LINE, f"step {model.store.step}"]
    lines.extend(_config_to_lines(model.cfg))
    for name in model.store.names():
        arr = model.store[name].data
        fname = f"{name}.bin"
        shape = "x".join(str(d) for d in arr.shape)
        lines.append(f"param {name} {shape} {fname}")
        (path / fname).write_bytes(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    (path / "manifest.txt").write_text("\n".join(lines) + "\n")
    return path


def load_checkpoint(path: str | Path) -> ForecastModel:
    path = Path(path)
    manifest = path / "manifest.txt"
    if not manifest.is_file():
        raise DataError(f"not a checkpoint directory (missing manifest.txt): {path}")
    lines = manifest.read_text().splitlines()
    if not lines or lines[0] != _FORMAT_LINE:
        raise DataError(f"unrecognized checkpoint format in {manifest}")
    config_pairs: dict[str, str] = {}
    params: list[tuple[str, tuple[int, ...], str]] = []
    step = 0
    for line in lines[1:]:
        if not line.strip():
            continue
        kind, rest = line.split(" ", 1)
        if kind == "step":
            step = int(rest)
        elif kind == "config":
            key, value = rest.split(" ", 1)
            config_pairs[key] = value
        elif kind == "param":
            name, shape_s, fname = rest.split(" ")
            shape = tuple(int(d) for d in shape_s.split("x"))
            params.append((name, shape, fname))
        else:
            raise DataError(f"unknown manifest line kind {kind!r} in {manifest}")
    cfg = _config_from_pairs(config_pairs)
    model = ForecastModel(cfg)
    expected = set(model.store.names())
    declared = {name for name, _, _ in params}
    if declared != expected:
        missing = sorted(expected - declared)
        extra = sorted(declared - expected)
        raise DataError(
            f"checkpoint parameters do not match the declared config"
            f" (missing {missing[:3]}, extra {extra[:3]})"
        )
    for name, shape, fname in params:
        blob = (path / fname).read_bytes()
        arr = np.frombuffer(blob, dtype="<f8").astype(np.float64).reshape(shape)
        target = model.store[name]
        if target.data.shape != arr.shape:
            raise DataError(
                f"parameter {name}: stored shape {arr.shape} != built shape {target.data.shape}"
            )
        target.data = arr
    model.store.step = step
    return model
