"""Experiment configuration: nested dataclasses with strict JSON round-tripping.

Every field has a default; loading rejects unknown keys and wrong types with
path-qualified messages, and save -> load reproduces an equal config.
"""

from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError


@dataclass
class DistBlock:
    kind: str = "gaussian_ring"
    moon_noise: float = 0.05
    modes: int = 8
    radius: float = 1.0
    mode_sigma: float = 0.1
    cells: int = 4
    half_width: float = 2.0


@dataclass
class ToySweepBlock:
    dims: tuple[int, ...] = (2, 4, 16, 64, 128)
    alphas: tuple[float, ...] = (0.0, 0.5, 1.0, 2.0)
    beta: float = 1.0
    dist: DistBlock = field(default_factory=DistBlock)
    hidden_dims: tuple[int, ...] = (512, 512, 512, 512)
    embed_frequencies: int = 16
    train_steps: int = 300
    batch_size: int = 64
    lr: float = 1e-3
    sample_steps: int = 100
    n_generated: int = 2000
    n_reference: int = 2000
    shift_a: float = 1.0
    emit_svg: bool = True
    dump_cells: bool = True


@dataclass
class SignalBlock:
    n: int = 64
    k_low: int = 4
    k_detail: int = 10
    sigma_v: float = 0.3
    base_amplitudes: tuple[float, ...] = (1.0, 0.7, 0.45, 0.25)


@dataclass
class WeightsBlock:
    alpha_rec: float = 1.0
    beta_perc: float = 1.0
    eta: float = 5.0
    kappa: float = 0.75
    tau: float = 0.2
    sigma_bar: float = 0.08


@dataclass
class LvraeTrainBlock:
    signal: SignalBlock = field(default_factory=SignalBlock)
    weights: WeightsBlock = field(default_factory=WeightsBlock)
    feature_dim: int = 32
    enc_hidden: tuple[int, ...] = (256, 256)
    dec_hidden: tuple[int, ...] = (256, 256, 256)
    steps: int = 20000
    batch_size: int = 128
    lr: float = 1e-3
    n_eval: int = 1000


@dataclass
class NoiseFtBlock:
    steps: int = 6000
    batch_size: int = 128
    lr: float = 2e-4
    warmup_frac: float = 0.1
    fixed_sigma_ablation: float = 0.1
    disc_hidden: tuple[int, ...] = (256, 256)
    eval_noise_levels: tuple[float, ...] = (0.0, 0.1, 0.2)
    n_eval: int = 1000


@dataclass
class GenBlock:
    flow_steps: int = 1500
    flow_batch: int = 128
    flow_lr: float = 1e-3
    hidden_dims: tuple[int, ...] = (256, 256, 256)
    embed_frequencies: int = 16
    sample_steps: int = 100
    n_generated: int = 1000
    n_reference: int = 1000
    sigma_bars: tuple[float, ...] = (0.0, 0.02, 0.04, 0.06, 0.08, 0.1, 0.12)


@dataclass
class ExperimentConfig:
    seed: int = 0
    toy_sweep: ToySweepBlock = field(default_factory=ToySweepBlock)
    lvrae: LvraeTrainBlock = field(default_factory=LvraeTrainBlock)
    noise_ft: NoiseFtBlock = field(default_factory=NoiseFtBlock)
    generation: GenBlock = field(default_factory=GenBlock)


def _coerce(value: Any, ftype: Any, path: str) -> Any:
    origin = getattr(ftype, "__origin__", None)
    if dataclasses.is_dataclass(ftype):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object, got {type(value).__name__}")
        return _from_dict(ftype, value, path)
    if origin is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {type(value).__name__}")
        elem = ftype.__args__[0]
        return tuple(_coerce(v, elem, f"{path}[{i}]") for i, v in enumerate(value))
    if ftype is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {type(value).__name__}")
        return float(value)
    if ftype is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {type(value).__name__}")
        return value
    if ftype is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {type(value).__name__}")
        return value
    if ftype is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {type(value).__name__}")
        return value
    raise ConfigError(f"{path}: unsupported field type {ftype!r}")


def _from_dict(cls, data: dict, path: str = ""):
    hints = typing.get_type_hints(cls)
    known = {f.name: hints[f.name] for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"{where}: unknown key")
    kwargs = {}
    for name, ftype in known.items():
        if name in data:
            where = f"{path}.{name}" if path else name
            kwargs[name] = _coerce(data[name], ftype, where)
    return cls(**kwargs)


def _to_jsonable(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_to_jsonable(v) for v in obj]
    return obj


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"config root: expected an object, got {type(data).__name__}")
    return _from_dict(ExperimentConfig, data)


def config_to_dict(config: ExperimentConfig) -> dict:
    return _to_jsonable(config)


def load_config(path) -> ExperimentConfig:
    """Parse a JSON config file, filling defaults and rejecting unknown keys."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)


def save_config(config: ExperimentConfig, path):
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n")
