"""The two-level transformer: tokenization, encoders, fusion, decoding.

All functions accept a leading batch dimension in addition to the documented
shapes, so a whole batch of tiles flows through one taped graph.

Attention internals use the order-canonical ops from ``autodiff``
(``einsum_matmul``, ``attention_apply``, sorted-denominator ``softmax``) so
that permuting token order permutes outputs bitwise when no positional
embedding is involved.
"""

from __future__ import annotations

import math

import numpy as np

from ..autodiff import (
    Tensor,
    add,
    attention_apply,
    einsum_matmul,
    gelu,
    layer_norm,
    logistic,
    matmul,
    reshape,
    scale,
    softmax,
    transpose,
)
from ..errors import ShapeError
from .config import ModelConfig
from .params import LayerParams, ModelParams, parameter_count


def _lead(x: Tensor, trailing: int) -> tuple:
    return x.shape[:x.ndim - trailing]


def patchify(x: Tensor, patch: int) -> Tensor:
    """Cut (..., H, W) into (..., n_patch, patch*patch) row-major blocks.

    Patches are ordered left-to-right, top-to-bottom over the patch grid,
    and each patch is flattened row-major.
    """
    if x.ndim < 2:
        raise ShapeError(f"patchify expects at least 2-D input, got {x.shape}")
    h, w = x.shape[-2], x.shape[-1]
    if h % patch or w % patch:
        raise ShapeError(f"image {h}x{w} is not divisible by patch size {patch}")
    lead = _lead(x, 2)
    hp, wp = h // patch, w // patch
    t = reshape(x, lead + (hp, patch, wp, patch))
    nd = t.ndim
    t = transpose(t, tuple(range(nd - 4)) + (nd - 4, nd - 2, nd - 3, nd - 1))
    return reshape(t, lead + (hp * wp, patch * patch))


def subpatchify(x: Tensor, patch: int, sub: int) -> Tensor:
    """Cut (..., H, W) into (..., n_patch, n_sub, sub*sub).

    Sub-patches are grouped under their owning patch; both the patch grid
    and the sub-patch grid within a patch are row-major.
    """
    if x.ndim < 2:
        raise ShapeError(f"subpatchify expects at least 2-D input, got {x.shape}")
    h, w = x.shape[-2], x.shape[-1]
    if h % patch or w % patch:
        raise ShapeError(f"image {h}x{w} is not divisible by patch size {patch}")
    if patch % sub:
        raise ShapeError(f"patch size {patch} is not divisible by sub-patch size {sub}")
    lead = _lead(x, 2)
    hp, wp = h // patch, w // patch
    q = patch // sub
    t = reshape(x, lead + (hp, q, sub, wp, q, sub))
    nd = t.ndim
    t = transpose(t, tuple(range(nd - 6)) + (nd - 6, nd - 3, nd - 5, nd - 2, nd - 4, nd - 1))
    return reshape(t, lead + (hp * wp, q * q, sub * sub))


def stitch(patches: Tensor, height: int, width: int, patch: int) -> Tensor:
    """Exact inverse of ``patchify``: (..., n_patch, patch*patch) -> (..., H, W)."""
    if patches.ndim < 2:
        raise ShapeError(f"stitch expects at least 2-D input, got {patches.shape}")
    hp, wp = height // patch, width // patch
    n, p2 = patches.shape[-2], patches.shape[-1]
    if n != hp * wp or p2 != patch * patch:
        raise ShapeError(
            f"stitch: token grid {patches.shape[-2:]} does not match "
            f"{height}x{width} with patch {patch}"
        )
    lead = _lead(patches, 2)
    t = reshape(patches, lead + (hp, wp, patch, patch))
    nd = t.ndim
    t = transpose(t, tuple(range(nd - 4)) + (nd - 4, nd - 2, nd - 3, nd - 1))
    return reshape(t, lead + (height, width))


def embed_patches(raw: Tensor, weight: Tensor, bias: Tensor, pe: Tensor) -> Tensor:
    """Linear projection of raw patch pixels plus the positional table."""
    projected = add(matmul(raw, transpose(weight)), bias)
    return add(projected, pe)


def embed_subpatches(raw: Tensor, weight: Tensor, bias: Tensor, pe: Tensor) -> Tensor:
    """Same as ``embed_patches``; the positional table is indexed by the
    sub-patch position within its patch, so it is shared across patches."""
    projected = add(matmul(raw, transpose(weight)), bias)
    return add(projected, pe)


def _swap_last(x: Tensor) -> Tensor:
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(x, tuple(axes))


def self_attention(q: Tensor, k: Tensor, v: Tensor, dk: int | None = None) -> Tensor:
    """softmax(q k^T / sqrt(dk)) v over the last two axes."""
    if dk is None:
        dk = q.shape[-1]
    scores = scale(einsum_matmul(q, _swap_last(k)), 1.0 / math.sqrt(dk))
    return attention_apply(softmax(scores, axis=-1), v)


def _split_heads(x: Tensor, heads: int) -> Tensor:
    lead = _lead(x, 2)
    n, d = x.shape[-2], x.shape[-1]
    t = reshape(x, lead + (n, heads, d // heads))
    nd = t.ndim
    return transpose(t, tuple(range(nd - 3)) + (nd - 2, nd - 3, nd - 1))


def _merge_heads(x: Tensor) -> Tensor:
    lead = _lead(x, 3)
    heads, n, dk = x.shape[-3], x.shape[-2], x.shape[-1]
    nd = x.ndim
    t = transpose(x, tuple(range(nd - 3)) + (nd - 2, nd - 3, nd - 1))
    return reshape(t, lead + (n, heads * dk))


def multi_head_attention(x: Tensor, layer: LayerParams, heads: int) -> Tensor:
    """Multi-head self-attention over (..., n, d) with packed projections
    and the concatenating output projection."""
    d = x.shape[-1]
    if d % heads:
        raise ShapeError(f"token dim {d} is not divisible by {heads} heads")
    q = _split_heads(einsum_matmul(x, layer.wq), heads)
    k = _split_heads(einsum_matmul(x, layer.wk), heads)
    v = _split_heads(einsum_matmul(x, layer.wv), heads)
    ctx = self_attention(q, k, v)
    return einsum_matmul(_merge_heads(ctx), layer.wo)


def encoder_block(x: Tensor, layer: LayerParams, heads: int, eps: float,
                  attn_residual: bool = True) -> Tensor:
    """Pre-norm attention with a linear tail, then a pre-norm GELU MLP.

    Both halves carry residual connections by default; ``attn_residual``
    False drops the one around attention.
    """
    attended = multi_head_attention(layer_norm(x, layer.ln1_gamma, layer.ln1_beta, eps),
                                    layer, heads)
    attended = matmul(attended, layer.wl)
    y = add(x, attended) if attn_residual else attended
    normed = layer_norm(y, layer.ln2_gamma, layer.ln2_beta, eps)
    hidden = gelu(add(matmul(normed, layer.mlp_w1), layer.mlp_b1))
    return add(y, add(matmul(hidden, layer.mlp_w2), layer.mlp_b2))


def encode_stack(x: Tensor, layers: list[LayerParams], heads: int, eps: float,
                 attn_residual: bool = True) -> Tensor:
    for layer in layers:
        x = encoder_block(x, layer, heads, eps, attn_residual)
    return x


def fuse(patch_tokens: Tensor, sub_tokens: Tensor, params: ModelParams,
         eps: float) -> Tensor:
    """Add each patch token to the normalized affine image of its
    concatenated sub-patch tokens: (..., n, nsub, dl) -> (..., n, d)."""
    lead = _lead(sub_tokens, 3)
    n, nsub, dl = sub_tokens.shape[-3], sub_tokens.shape[-2], sub_tokens.shape[-1]
    flat = reshape(sub_tokens, lead + (n, nsub * dl))
    projected = add(matmul(flat, params.fusion_weight), params.fusion_bias)
    normed = layer_norm(projected, params.fusion_gamma, params.fusion_beta, eps)
    return add(patch_tokens, normed)


def decode(tokens: Tensor, params: ModelParams, config: ModelConfig) -> Tensor:
    """Decoder stack, output projection to pixel space, logistic squashing."""
    x = encode_stack(tokens, params.decoder_layers, config.heads_decoder,
                     config.ln_eps, config.attn_residual)
    logits = add(matmul(x, params.output_weight), params.output_bias)
    return logistic(logits)


class DocBinFormer:
    """Two-level transformer mapping a grayscale tile to per-pixel ink
    probabilities in (0, 1)."""

    def __init__(self, config: ModelConfig, params: ModelParams | None = None,
                 seed: int = 0, dtype=np.float32):
        config.validate()
        self.config = config
        self.params = params if params is not None else ModelParams.initialize(
            config, seed=seed, dtype=dtype)
        self.params.audit()

    def forward_tensor(self, x: Tensor) -> Tensor:
        """(H, W) or (B, H, W) tile tensor -> same-shaped prediction tensor."""
        cfg = self.config
        if x.shape[-2:] != (cfg.height, cfg.width):
            raise ShapeError(
                f"input {x.shape} does not match configured tile "
                f"{cfg.height}x{cfg.width}"
            )
        p = self.params
        raw_patches = patchify(x, cfg.patch_size)
        raw_subs = subpatchify(x, cfg.patch_size, cfg.subpatch_size)
        patch_tokens = embed_patches(raw_patches, p.patch_weight, p.patch_bias, p.pe_patch)
        sub_tokens = embed_subpatches(raw_subs, p.subpatch_weight, p.subpatch_bias, p.pe_subpatch)
        encoded_patches = encode_stack(patch_tokens, p.global_layers, cfg.heads_global,
                                       cfg.ln_eps, cfg.attn_residual)
        encoded_subs = encode_stack(sub_tokens, p.local_layers, cfg.heads_local,
                                    cfg.ln_eps, cfg.attn_residual)
        fused = fuse(encoded_patches, encoded_subs, p, cfg.ln_eps)
        out_patches = decode(fused, p, cfg)
        return stitch(out_patches, cfg.height, cfg.width, cfg.patch_size)

    def forward(self, tile: np.ndarray) -> np.ndarray:
        """Plain-array convenience wrapper around ``forward_tensor``."""
        dtype = self.params.patch_weight.dtype
        return self.forward_tensor(Tensor(np.asarray(tile, dtype=dtype))).data

    def binarize(self, tile: np.ndarray, threshold: float = 0.5) -> np.ndarray:
        """Threshold the prediction: values below ``threshold`` become ink (0)."""
        pred = self.forward(tile)
        return np.where(pred < threshold, 0.0, 1.0)

    def binarize_image(self, image: np.ndarray, threshold: float = 0.5) -> np.ndarray:
        """Binarize an arbitrary-size image by tiling, predicting each tile,
        and reassembling before thresholding."""
        from ..data.tiling import tile as tile_image, untile

        cfg = self.config
        if cfg.height != cfg.width:
            raise ShapeError("tiled inference requires a square tile configuration")
        image = np.asarray(image, dtype=np.float64)
        if image.shape == (cfg.height, cfg.width):
            return self.binarize(image, threshold)
        ts = tile_image(image, size=cfg.height, pad_value=1.0)
        predicted = [self.forward(t) for t in ts.tiles]
        stitched = untile(ts.replace_tiles(predicted))
        return np.where(stitched < threshold, 0.0, 1.0)

    def parameter_count(self):
        return parameter_count(self.config)
