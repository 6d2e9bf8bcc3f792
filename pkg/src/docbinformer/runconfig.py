"""Run configuration: INI files plus command-line overrides.

A run file is flat ``key = value`` text in three sections::

    [model]     any ModelConfig field, e.g. height, patch_size, ln_eps
    [training]  any TrainConfig field, e.g. learning_rate, epochs, seed
    [run]       dataset_root, checkpoint, output_dir, held_out_year

Unknown sections or keys are rejected by name. Command-line flags override
file values, which override the preset defaults.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass

from .errors import ConfigError
from .model import ModelConfig, default_config, tiny_config
from .training import TrainConfig

_RUN_KEYS = ("dataset_root", "checkpoint", "output_dir", "held_out_year")

PRESETS = {
    "default": default_config,
    "tiny": tiny_config,
}


@dataclass
class RunConfig:
    """Everything a command needs: model, training, and path settings."""

    model: ModelConfig
    training: TrainConfig
    dataset_root: str | None = None
    checkpoint: str | None = None
    output_dir: str | None = None
    held_out_year: str | None = None

    def validate(self) -> None:
        self.model.validate()
        self.training.validate()


def _field_types(cls) -> dict:
    return {f.name: f.type for f in dataclasses.fields(cls)}


_MODEL_TYPES = _field_types(ModelConfig)
_TRAIN_TYPES = _field_types(TrainConfig)


def _coerce(raw: str, type_name, where: str):
    type_name = str(type_name)
    try:
        if type_name in ("int", "<class 'int'>"):
            return int(raw)
        if type_name in ("float", "<class 'float'>"):
            return float(raw)
        if type_name in ("bool", "<class 'bool'>"):
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"invalid value {raw!r} for {where}") from exc


def _apply_section(target, section_name: str, items, types: dict):
    for key, raw in items:
        if key not in types:
            raise ConfigError(
                f"unknown key {key!r} in section [{section_name}]"
            )
        setattr(target, key, _coerce(raw, types[key], f"[{section_name}] {key}"))


def load_run_config(path=None, preset: str = "default") -> RunConfig:
    """Build a RunConfig from a preset and an optional INI file."""
    if preset not in PRESETS:
        raise ConfigError(
            f"unknown preset {preset!r}; choose from {sorted(PRESETS)}"
        )
    run = RunConfig(model=PRESETS[preset](), training=TrainConfig())
    if path is None:
        return run
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";")
    )
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    for section in parser.sections():
        items = parser.items(section)
        if section == "model":
            _apply_section(run.model, section, items, _MODEL_TYPES)
        elif section == "training":
            _apply_section(run.training, section, items, _TRAIN_TYPES)
        elif section == "run":
            for key, raw in items:
                if key not in _RUN_KEYS:
                    raise ConfigError(f"unknown key {key!r} in section [run]")
                setattr(run, key, raw)
        else:
            raise ConfigError(f"unknown section [{section}] in {path}")
    run.validate()
    return run


#: argparse destination -> (target object, field) for scalar overrides.
_OVERRIDE_MAP = {
    "epochs": ("training", "epochs"),
    "batch_size": ("training", "batch_size"),
    "learning_rate": ("training", "learning_rate"),
    "weight_decay": ("training", "weight_decay"),
    "seed": ("training", "seed"),
    "max_steps": ("training", "max_steps"),
    "checkpoint_every": ("training", "checkpoint_every"),
    "dataset_root": ("run", "dataset_root"),
    "checkpoint": ("run", "checkpoint"),
    "output_dir": ("run", "output_dir"),
    "held_out_year": ("run", "held_out_year"),
}


def apply_overrides(run: RunConfig, args) -> RunConfig:
    """Fold parsed command-line flags into a RunConfig, then validate."""
    for dest, (owner, field) in _OVERRIDE_MAP.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if owner == "training":
            setattr(run.training, field, value)
        else:
            setattr(run, field, value)
    tile_size = getattr(args, "tile_size", None)
    if tile_size is not None:
        run.model = dataclasses.replace(run.model, height=tile_size,
                                        width=tile_size)
    if getattr(args, "no_attn_residual", False):
        run.model = dataclasses.replace(run.model, attn_residual=False)
    run.validate()
    return run


def require(run: RunConfig, field: str) -> str:
    """Fetch a path-like setting that a command cannot run without."""
    value = getattr(run, field)
    if value is None:
        raise ConfigError(
            f"{field} is required; set it with --{field.replace('_', '-')}"
            f" or in the [run] section of the config file"
        )
    return value
