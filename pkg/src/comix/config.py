"""Central configuration shared by every stage of the toolkit.

A single JSON file holds all tunables. The audio section is a hard
compatibility contract: the spectrogram model and the vocoder must agree
on it bit-for-bit, so it is embedded in every checkpoint and compared on
load.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

CONFIG_SCHEMA_VERSION = "1"
CONFIG_ENV_VAR = "COMIX_CONFIG"


class ConfigError(ValueError):
    """Raised for schema violations; message carries the offending key path."""


@dataclass(frozen=True)
class AudioConfig:
    sample_rate: int = 22050
    frame_ms: float = 50.0
    hop_ms: float = 12.0
    n_mels: int = 80
    fmin: float = 0.0
    fmax: float = 8000.0
    eps: float = 1e-5
    trim_silence: bool = False
    trim_threshold_dbfs: float = -40.0

    @property
    def win_length(self) -> int:
        return int(round(self.frame_ms * self.sample_rate / 1000.0))

    @property
    def hop_length(self) -> int:
        return int(round(self.hop_ms * self.sample_rate / 1000.0))


@dataclass(frozen=True)
class EncoderConfig:
    embed_dim: int = 512
    n_conv: int = 3
    conv_filters: int = 512
    conv_kernel: int = 5
    bilstm_units_total: int = 512

    def __post_init__(self):
        if self.bilstm_units_total % 2 != 0:
            raise ConfigError("encoder.bilstm_units_total must be even (split across directions)")


@dataclass(frozen=True)
class DecoderConfig:
    n_lstm: int = 2
    lstm_units: int = 1024
    prenet_units: tuple[int, ...] = (256, 256)
    prenet_dropout: float = 0.5
    postnet_layers: int = 5
    postnet_filters: int = 512
    postnet_kernel: int = 5
    attn_dim: int = 128
    location_filters: int = 32
    location_kernel: int = 31
    gate_threshold: float = 0.5
    max_steps: int = 1000


@dataclass(frozen=True)
class WaveglowConfig:
    n_flows: int = 12
    group_size: int = 8
    early_output_every: int = 4
    early_output_channels: int = 2
    wn_layers: int = 8
    wn_channels: int = 256
    wn_kernel: int = 3
    sigma_train: float = 1.0
    sigma_infer: float = 0.7

    def __post_init__(self):
        # channel budget: early outputs across the stack must leave >= 2
        # channels for the final flow's coupling split
        remaining = self.group_size
        for i in range(self.n_flows):
            if i % self.early_output_every == 0 and i > 0:
                remaining -= self.early_output_channels
        if remaining < 2:
            raise ConfigError("waveglow: early outputs exhaust the channel budget")


@dataclass(frozen=True)
class TrainConfig:
    lr_pretrain: float = 1e-3
    lr_finetune: float = 1e-4
    weight_decay: float = 1e-6
    grad_clip_norm: float = 1.0
    batch_frames: int = 2048
    seed: int = 1234
    checkpoint_every: int = 500
    eval_every: int = 100
    plateau_patience: int = 10


@dataclass(frozen=True)
class PathsConfig:
    work_dir: str = "work"
    cache_dir: str = "cache"


@dataclass(frozen=True)
class ToolkitConfig:
    version: str = CONFIG_SCHEMA_VERSION
    audio: AudioConfig = field(default_factory=AudioConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    waveglow: WaveglowConfig = field(default_factory=WaveglowConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {
    "audio": AudioConfig,
    "encoder": EncoderConfig,
    "decoder": DecoderConfig,
    "waveglow": WaveglowConfig,
    "train": TrainConfig,
    "paths": PathsConfig,
}


def _build_section(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    known = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown key {path}.{key}")
    kwargs = dict(data)
    for f in dataclasses.fields(cls):
        if f.name in kwargs and isinstance(f.default, tuple):
            kwargs[f.name] = tuple(kwargs[f.name])
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(f"{path}: {e}") from e


def config_from_dict(data: dict) -> ToolkitConfig:
    """Build a config from a plain dict, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    version = data.get("version", CONFIG_SCHEMA_VERSION)
    if str(version) != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"unsupported config version {version!r}")
    for key in data:
        if key != "version" and key not in _SECTIONS:
            raise ConfigError(f"unknown key {key}")
    sections: dict[str, Any] = {}
    for name, cls in _SECTIONS.items():
        sections[name] = _build_section(cls, data.get(name, {}), name)
    return ToolkitConfig(version=CONFIG_SCHEMA_VERSION, **sections)


def load_config(path: str | Path | None = None) -> ToolkitConfig:
    """Load config from a JSON file; defaults fill in anything unspecified.

    With no path, the COMIX_CONFIG environment variable is consulted;
    failing that, pure defaults are returned.
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
        if path is None:
            return ToolkitConfig()
    text = Path(path).read_text(encoding="utf-8").strip()
    data = json.loads(text) if text else {}
    return config_from_dict(data)


def save_config(cfg: ToolkitConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True), encoding="utf-8")
