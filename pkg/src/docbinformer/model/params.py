"""Parameter container, initialization, shape audit, and size accounting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor
from ..errors import ShapeError
from .config import ModelConfig

INIT_STD = 0.02

# Per-layer tensor names and their shapes for an encoder of width d with an
# MLP hidden width m. Attention projections carry no bias.
_LAYER_FIELDS = (
    ("wq", lambda d, m: (d, d)),
    ("wk", lambda d, m: (d, d)),
    ("wv", lambda d, m: (d, d)),
    ("wo", lambda d, m: (d, d)),
    ("wl", lambda d, m: (d, d)),
    ("ln1.gamma", lambda d, m: (d,)),
    ("ln1.beta", lambda d, m: (d,)),
    ("ln2.gamma", lambda d, m: (d,)),
    ("ln2.beta", lambda d, m: (d,)),
    ("mlp.w1", lambda d, m: (d, m)),
    ("mlp.b1", lambda d, m: (m,)),
    ("mlp.w2", lambda d, m: (m, d)),
    ("mlp.b2", lambda d, m: (d,)),
)


class LayerParams:
    """Tensors of one encoder layer, addressable as attributes."""

    __slots__ = ("wq", "wk", "wv", "wo", "wl",
                 "ln1_gamma", "ln1_beta", "ln2_gamma", "ln2_beta",
                 "mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2")

    def set(self, field: str, tensor: Tensor):
        setattr(self, field.replace(".", "_"), tensor)

    def get(self, field: str) -> Tensor:
        return getattr(self, field.replace(".", "_"))


def _stack_dims(config: ModelConfig):
    return {
        "global": (config.global_dim, config.mlp_global, config.global_layers),
        "local": (config.local_dim, config.mlp_local, config.local_layers),
        "decoder": (config.global_dim, config.mlp_decoder, config.decoder_layers),
    }


def expected_shapes(config: ModelConfig) -> dict[str, tuple]:
    """Canonical name -> shape map; also fixes serialization order."""
    d, dl = config.global_dim, config.local_dim
    shapes = {
        "patch_embed.weight": (d, config.patch_dim),
        "patch_embed.bias": (d,),
        "subpatch_embed.weight": (dl, config.subpatch_dim),
        "subpatch_embed.bias": (dl,),
        "pe.patch": (config.n_patch, d),
        "pe.subpatch": (config.n_subpatch_per_patch, dl),
    }
    for stack, (dim, mlp, layers) in _stack_dims(config).items():
        for i in range(layers):
            for field, shape_fn in _LAYER_FIELDS:
                shapes[f"{stack}.{i}.{field}"] = shape_fn(dim, mlp)
    shapes["fusion.weight"] = (config.n_subpatch_per_patch * dl, d)
    shapes["fusion.bias"] = (d,)
    shapes["fusion.ln.gamma"] = (d,)
    shapes["fusion.ln.beta"] = (d,)
    shapes["output.weight"] = (d, config.patch_dim)
    shapes["output.bias"] = (config.patch_dim,)
    return shapes


def _decays(name: str) -> bool:
    # Weight decay applies to weight matrices only; biases, layer-norm
    # affines, and positional embeddings are exempt.
    if name.startswith("pe."):
        return False
    leaf = name.rsplit(".", 1)[-1]
    return leaf in {"weight", "wq", "wk", "wv", "wo", "wl", "w1", "w2"}


def _init_array(name: str, shape: tuple, rng: np.random.Generator, dtype) -> np.ndarray:
    leaf = name.rsplit(".", 1)[-1]
    if leaf == "gamma":
        return np.ones(shape, dtype=dtype)
    if leaf in {"beta", "bias", "b1", "b2"}:
        return np.zeros(shape, dtype=dtype)
    return rng.normal(0.0, INIT_STD, size=shape).astype(dtype)


class ModelParams:
    """All learnable tensors of the model, in a fixed canonical order."""

    def __init__(self, config: ModelConfig, tensors: dict[str, Tensor]):
        self.config = config
        self._tensors = tensors
        self.global_layers = self._collect("global", config.global_layers)
        self.local_layers = self._collect("local", config.local_layers)
        self.decoder_layers = self._collect("decoder", config.decoder_layers)
        self.patch_weight = tensors["patch_embed.weight"]
        self.patch_bias = tensors["patch_embed.bias"]
        self.subpatch_weight = tensors["subpatch_embed.weight"]
        self.subpatch_bias = tensors["subpatch_embed.bias"]
        self.pe_patch = tensors["pe.patch"]
        self.pe_subpatch = tensors["pe.subpatch"]
        self.fusion_weight = tensors["fusion.weight"]
        self.fusion_bias = tensors["fusion.bias"]
        self.fusion_gamma = tensors["fusion.ln.gamma"]
        self.fusion_beta = tensors["fusion.ln.beta"]
        self.output_weight = tensors["output.weight"]
        self.output_bias = tensors["output.bias"]
        self.audit()

    def _collect(self, stack: str, layers: int) -> list[LayerParams]:
        out = []
        for i in range(layers):
            layer = LayerParams()
            for field, _ in _LAYER_FIELDS:
                layer.set(field, self._tensors[f"{stack}.{i}.{field}"])
            out.append(layer)
        return out

    @classmethod
    def initialize(cls, config: ModelConfig, seed: int | np.random.Generator = 0,
                   dtype=np.float32) -> "ModelParams":
        """Gaussian(0, 0.02) weights and positional embeddings, zero biases,
        unit layer-norm gains.  Draw order follows the canonical name order,
        so a seed fully determines every tensor."""
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        tensors = {}
        for name, shape in expected_shapes(config).items():
            tensors[name] = Tensor(_init_array(name, shape, rng, dtype), requires_grad=True)
        return cls(config, tensors)

    @classmethod
    def from_arrays(cls, config: ModelConfig, arrays: dict[str, np.ndarray]) -> "ModelParams":
        tensors = {name: Tensor(arr, requires_grad=True) for name, arr in arrays.items()}
        return cls(config, tensors)

    def named(self):
        """Yield (name, tensor, decays) in canonical order."""
        for name in expected_shapes(self.config):
            yield name, self._tensors[name], _decays(name)

    def audit(self):
        """Check every tensor's shape against the configuration."""
        expected = expected_shapes(self.config)
        missing = set(expected) - set(self._tensors)
        if missing:
            raise ShapeError(f"missing parameter tensors: {sorted(missing)[:3]}")
        for name, shape in expected.items():
            actual = self._tensors[name].shape
            if tuple(actual) != tuple(shape):
                raise ShapeError(
                    f"parameter {name!r} has shape {tuple(actual)}, expected {tuple(shape)}"
                )

    def zero_grads(self):
        for _, tensor, _ in self.named():
            tensor.zero_grad()

    def total_size(self) -> int:
        return sum(t.size for _, t, _ in self.named())


def _layer_size(d: int, m: int) -> int:
    attention = 5 * d * d          # wq, wk, wv, wo, wl
    norms = 4 * d                  # two layer norms, gain and shift each
    mlp = d * m + m + m * d + d
    return attention + norms + mlp


@dataclass
class ParameterCount:
    """Parameter totals per component.

    Counting boundary: ``global_encoder`` is the global encoder stack alone.
    ``local_encoder`` is the local encoder stack plus the fusion head (the
    affine and layer norm that project concatenated sub-patch tokens into
    patch space), since that head exists only to serve the local branch.
    ``decoder`` includes the output projection.  Patch and sub-patch
    embeddings with their positional tables are counted separately under
    ``embeddings`` and belong to neither encoder.
    """

    embeddings: int
    global_encoder: int
    local_encoder: int
    decoder: int
    total: int

    def describe(self) -> str:
        lines = [
            f"embeddings       {self.embeddings:>12,}",
            f"global encoder   {self.global_encoder:>12,}",
            f"local encoder    {self.local_encoder:>12,}",
            f"decoder          {self.decoder:>12,}",
            f"total            {self.total:>12,}",
            "",
            "Boundary: global encoder counts its stack only; local encoder",
            "counts its stack plus the fusion head that lifts sub-patch",
            "tokens into patch space; decoder includes the output projection;",
            "embeddings and positional tables are listed separately.",
        ]
        return "\n".join(lines)


def parameter_count(config: ModelConfig) -> ParameterCount:
    """Closed-form parameter totals; no tensors are allocated."""
    d, dl = config.global_dim, config.local_dim
    embeddings = (
        d * config.patch_dim + d
        + dl * config.subpatch_dim + dl
        + config.n_patch * d
        + config.n_subpatch_per_patch * dl
    )
    global_encoder = config.global_layers * _layer_size(d, config.mlp_global)
    fusion = config.n_subpatch_per_patch * dl * d + d + 2 * d
    local_encoder = config.local_layers * _layer_size(dl, config.mlp_local) + fusion
    output_head = d * config.patch_dim + config.patch_dim
    decoder = config.decoder_layers * _layer_size(d, config.mlp_decoder) + output_head
    total = embeddings + global_encoder + local_encoder + decoder
    return ParameterCount(embeddings, global_encoder, local_encoder, decoder, total)
