from .config import (
    ABLATION_ROWS,
    ModelConfig,
    ablation_config,
    config_from_ints,
    config_to_ints,
    default_config,
    tiny_config,
)
from .network import (
    DocBinFormer,
    decode,
    embed_patches,
    embed_subpatches,
    encode_stack,
    encoder_block,
    fuse,
    multi_head_attention,
    patchify,
    self_attention,
    stitch,
    subpatchify,
)
from .params import LayerParams, ModelParams, ParameterCount, expected_shapes, parameter_count

__all__ = [
    "ABLATION_ROWS", "ModelConfig", "ablation_config", "config_from_ints",
    "config_to_ints", "default_config", "tiny_config",
    "DocBinFormer", "decode", "embed_patches", "embed_subpatches",
    "encode_stack", "encoder_block", "fuse", "multi_head_attention",
    "patchify", "self_attention", "stitch", "subpatchify",
    "LayerParams", "ModelParams", "ParameterCount", "expected_shapes",
    "parameter_count",
]
