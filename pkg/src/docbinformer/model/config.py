"""Model hyperparameter schema and the standard configurations."""

from __future__ import annotations

from dataclasses import dataclass, fields

from ..errors import ConfigError


@dataclass
class ModelConfig:
    """Architecture hyperparameters for the two-level transformer.

    A tile of ``height x width`` pixels is cut into ``patch_size`` square
    patches for the global branch and ``subpatch_size`` squares within each
    patch for the local branch.  ``global_dim``/``local_dim`` are the token
    widths of the two encoder stacks; the decoder runs at ``global_dim``.
    """

    height: int = 256
    width: int = 256
    channels: int = 1
    patch_size: int = 16
    subpatch_size: int = 8
    global_dim: int = 768
    local_dim: int = 256
    heads_global: int = 8
    heads_local: int = 8
    heads_decoder: int = 1
    global_layers: int = 6
    local_layers: int = 4
    decoder_layers: int = 1
    mlp_global: int = 2048
    mlp_local: int = 2048
    mlp_decoder: int = 256
    ln_eps: float = 1e-6
    attn_residual: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.channels != 1:
            raise ConfigError(f"only single-channel input is supported, got channels={self.channels}")
        for name in ("height", "width", "patch_size", "subpatch_size", "global_dim",
                     "local_dim", "heads_global", "heads_local", "heads_decoder",
                     "global_layers", "local_layers", "decoder_layers",
                     "mlp_global", "mlp_local", "mlp_decoder"):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.height % self.patch_size or self.width % self.patch_size:
            raise ConfigError(
                f"tile {self.height}x{self.width} is not divisible by patch_size {self.patch_size}"
            )
        if self.patch_size % self.subpatch_size:
            raise ConfigError(
                f"patch_size {self.patch_size} is not divisible by subpatch_size {self.subpatch_size}"
            )
        if self.subpatch_size >= self.patch_size:
            raise ConfigError(
                f"subpatch_size {self.subpatch_size} must be smaller than patch_size {self.patch_size}"
            )
        if self.global_dim % self.heads_global:
            raise ConfigError(
                f"global_dim {self.global_dim} is not divisible by heads_global {self.heads_global}"
            )
        if self.local_dim % self.heads_local:
            raise ConfigError(
                f"local_dim {self.local_dim} is not divisible by heads_local {self.heads_local}"
            )
        if self.global_dim % self.heads_decoder:
            raise ConfigError(
                f"global_dim {self.global_dim} is not divisible by heads_decoder {self.heads_decoder}"
            )
        if self.ln_eps <= 0:
            raise ConfigError(f"ln_eps must be positive, got {self.ln_eps}")

    @property
    def n_patch(self) -> int:
        return (self.height * self.width) // (self.patch_size * self.patch_size)

    @property
    def n_subpatch_per_patch(self) -> int:
        return (self.patch_size // self.subpatch_size) ** 2

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size

    @property
    def subpatch_dim(self) -> int:
        return self.subpatch_size * self.subpatch_size


# Integer fields serialized into checkpoints, in fixed order. ln_eps rides
# along as an integer count of nano-units so every slot stays 32-bit.
CONFIG_INT_FIELDS = (
    "height", "width", "channels", "patch_size", "subpatch_size",
    "global_dim", "local_dim", "heads_global", "heads_local", "heads_decoder",
    "global_layers", "local_layers", "decoder_layers",
    "mlp_global", "mlp_local", "mlp_decoder",
)


def config_to_ints(config: ModelConfig) -> list[int]:
    values = [int(getattr(config, f)) for f in CONFIG_INT_FIELDS]
    values.append(int(round(config.ln_eps * 1e9)))
    values.append(1 if config.attn_residual else 0)
    return values


def config_from_ints(values) -> ModelConfig:
    values = list(values)
    expected = len(CONFIG_INT_FIELDS) + 2
    if len(values) != expected:
        raise ConfigError(f"expected {expected} config integers, got {len(values)}")
    kwargs = dict(zip(CONFIG_INT_FIELDS, values))
    kwargs["ln_eps"] = values[len(CONFIG_INT_FIELDS)] / 1e9
    kwargs["attn_residual"] = bool(values[len(CONFIG_INT_FIELDS) + 1])
    return ModelConfig(**kwargs)


def default_config(**overrides) -> ModelConfig:
    """The full-size configuration."""
    return ModelConfig(**overrides)


def tiny_config(**overrides) -> ModelConfig:
    """A desk-scale configuration used by tests and demos: 16x16 tiles,
    8/4 patching, narrow dims, one layer per stack, two heads."""
    base = dict(
        height=16, width=16, patch_size=8, subpatch_size=4,
        global_dim=16, local_dim=8,
        heads_global=2, heads_local=2, heads_decoder=2,
        global_layers=1, local_layers=1, decoder_layers=1,
        mlp_global=32, mlp_local=16, mlp_decoder=16,
    )
    base.update(overrides)
    return ModelConfig(**base)


# Architecture sweep rows: (patch, subpatch, global_dim, local_dim,
# global_layers, local_layers). Row 3 is the default configuration.
ABLATION_ROWS = {
    1: (16, 8, 1024, 256, 12, 4),
    2: (16, 8, 768, 256, 6, 12),
    3: (16, 8, 768, 256, 6, 4),
    4: (16, 4, 256, 256, 6, 4),
    5: (8, 4, 768, 768, 6, 4),
}


def ablation_config(row: int, height: int = 256, width: int = 256) -> ModelConfig:
    if row not in ABLATION_ROWS:
        raise ConfigError(f"unknown ablation row {row}; valid rows are {sorted(ABLATION_ROWS)}")
    patch, subpatch, gdim, ldim, glayers, llayers = ABLATION_ROWS[row]
    return ModelConfig(
        height=height, width=width,
        patch_size=patch, subpatch_size=subpatch,
        global_dim=gdim, local_dim=ldim,
        global_layers=glayers, local_layers=llayers,
    )
