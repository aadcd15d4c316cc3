"""Run configuration: one flat dataclass, loadable from an INI file.

The file uses three sections ([train], [loss], [model]) of flat key=value
pairs; every key maps 1:1 onto a :class:`TrainConfig` field (see README for
the documented set). Unknown keys are rejected.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import MissingFileError, SchemaError


@dataclass
class TrainConfig:
    # [train]
    steps: int = 2000
    batch_size: int = 2
    lr_g: float = 2e-4
    lr_d: float = 2e-4
    seed: int = 0
    checkpoint_every: int = 500
    log_every: int = 50
    lr_decay: float = 0.999
    lr_decay_every: int = 100
    slice_frames: int = 32
    wall_clock: bool = True
    # [loss]
    alpha: float = 0.3
    recon_weight: float = 45.0
    kl_weight: float = 1.0
    duration_weight: float = 1.0
    ascl_weight: float = 1.0
    # [model]
    latent_dim: int = 16
    flow_layers: int = 4
    flow_hidden: int = 64
    text_hidden: int = 64
    text_layers: int = 2
    posterior_hidden: int = 64
    decoder_channels: tuple[int, ...] = (96, 48, 24, 12)
    duration_hidden: int = 64
    noise_scale: float = 0.667

    def __post_init__(self):
        self.decoder_channels = tuple(int(c) for c in self.decoder_channels)
        if self.steps < 0:
            raise SchemaError("steps must be >= 0")
        if self.batch_size < 1:
            raise SchemaError("batch_size must be >= 1")
        if self.lr_g <= 0 or self.lr_d <= 0:
            raise SchemaError("learning rates must be positive")
        if not 0.0 < self.alpha <= 1.0:
            raise SchemaError("alpha must be in (0, 1]")
        for name in ("recon_weight", "kl_weight", "duration_weight", "ascl_weight"):
            if getattr(self, name) < 0:
                raise SchemaError(f"{name} must be >= 0")
        if self.latent_dim % 2:
            raise SchemaError("latent_dim must be even (coupling split)")
        if self.slice_frames < 1:
            raise SchemaError("slice_frames must be >= 1")
        if not 0.0 < self.lr_decay <= 1.0:
            raise SchemaError("lr_decay must be in (0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["decoder_channels"] = list(self.decoder_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**{**d, "decoder_channels": tuple(d["decoder_channels"])})


_SECTIONS = {
    "train": (
        "steps",
        "batch_size",
        "lr_g",
        "lr_d",
        "seed",
        "checkpoint_every",
        "log_every",
        "lr_decay",
        "lr_decay_every",
        "slice_frames",
        "wall_clock",
    ),
    "loss": ("alpha", "recon_weight", "kl_weight", "duration_weight", "ascl_weight"),
    "model": (
        "latent_dim",
        "flow_layers",
        "flow_hidden",
        "text_hidden",
        "text_layers",
        "posterior_hidden",
        "decoder_channels",
        "duration_hidden",
        "noise_scale",
    ),
}

_FIELD_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def _parse_value(key: str, raw: str):
    if key == "decoder_channels":
        return tuple(int(p) for p in raw.replace(",", " ").split())
    if key == "wall_clock":
        lowered = raw.strip().lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise SchemaError(f"wall_clock must be a boolean, got {raw!r}")
    typ = _FIELD_TYPES[key]
    if typ == "int":
        return int(raw)
    if typ == "float":
        return float(raw)
    raise SchemaError(f"cannot parse config key {key!r}")


def load_config(path: str | Path) -> TrainConfig:
    """Parse an INI config file into a TrainConfig, rejecting unknown keys."""
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise SchemaError(f"cannot parse config {path}: {exc}") from exc

    values: dict = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise SchemaError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                raise SchemaError(f"unknown key {key!r} in section [{section}]")
            values[key] = _parse_value(key, raw)
    return TrainConfig(**values)


def write_config(config: TrainConfig, path: str | Path) -> None:
    """Write a config as the INI layout load_config reads."""
    parser = configparser.ConfigParser()
    d = config.to_dict()
    for section, keys in _SECTIONS.items():
        parser[section] = {}
        for key in keys:
            value = d[key]
            if key == "decoder_channels":
                value = ",".join(str(c) for c in value)
            parser[section][key] = str(value)
    with Path(path).open("w", encoding="utf-8") as fh:
        parser.write(fh)
