"""Tokenization, attention, encoder blocks, fusion, and the full model."""

import numpy as np
import pytest

from docbinformer.autodiff import Tape, Tensor, mean, mul, sum_
from docbinformer.errors import ConfigError, ShapeError
from docbinformer.model import (
    DocBinFormer,
    ModelConfig,
    ModelParams,
    ablation_config,
    decode,
    default_config,
    embed_patches,
    encode_stack,
    encoder_block,
    expected_shapes,
    fuse,
    multi_head_attention,
    parameter_count,
    patchify,
    self_attention,
    stitch,
    subpatchify,
    tiny_config,
)
from docbinformer.model.params import LayerParams, _LAYER_FIELDS

import oracles


@pytest.fixture
def rng():
    return np.random.default_rng(99)


def random_layer(d, mlp, rng):
    layer = LayerParams()
    for field, shape_fn in _LAYER_FIELDS:
        layer.set(field, Tensor(rng.normal(0, 0.5, size=shape_fn(d, mlp)), requires_grad=True))
    return layer


def zero_layer(d, mlp):
    layer = LayerParams()
    for field, shape_fn in _LAYER_FIELDS:
        data = np.zeros(shape_fn(d, mlp))
        if field.endswith("gamma"):
            data = np.ones_like(data)
        layer.set(field, Tensor(data))
    return layer


class TestTokenization:
    def test_patchify_row_major_layout(self):
        x = Tensor(np.arange(16.0).reshape(4, 4))
        patches = patchify(x, 2).data
        expected = [[0, 1, 4, 5], [2, 3, 6, 7], [8, 9, 12, 13], [10, 11, 14, 15]]
        assert np.array_equal(patches, expected)

    def test_patchify_rejects_indivisible(self):
        with pytest.raises(ShapeError):
            patchify(Tensor(np.zeros((5, 4))), 2)

    def test_subpatchify_grouping(self):
        x = Tensor(np.arange(16.0).reshape(4, 4))
        groups = subpatchify(x, 4, 2).data
        expected = [[[0, 1, 4, 5], [2, 3, 6, 7], [8, 9, 12, 13], [10, 11, 14, 15]]]
        assert np.array_equal(groups, expected)

    def test_subpatchify_singletons_follow_patch_order(self):
        x = Tensor(np.arange(16.0).reshape(4, 4))
        groups = subpatchify(x, 2, 1).data
        assert groups.shape == (4, 4, 1)
        assert np.array_equal(groups[0].ravel(), [0, 1, 4, 5])

    def test_stitch_inverts_patchify(self, rng):
        x = rng.random((12, 18))
        back = stitch(patchify(Tensor(x), 3), 12, 18, 3)
        assert np.array_equal(back.data, x)

    def test_stitch_inverts_patchify_batched(self, rng):
        x = rng.random((5, 8, 8))
        back = stitch(patchify(Tensor(x), 4), 8, 8, 4)
        assert np.array_equal(back.data, x)

    def test_stitch_shape_mismatch(self):
        with pytest.raises(ShapeError):
            stitch(Tensor(np.zeros((4, 4))), 8, 8, 3)


class TestEmbedding:
    def test_zero_pe_is_pure_projection(self, rng):
        raw = rng.normal(size=(6, 4))
        w = rng.normal(size=(5, 4))
        b = rng.normal(size=5)
        out = embed_patches(Tensor(raw), Tensor(w), Tensor(b), Tensor(np.zeros((6, 5))))
        assert np.allclose(out.data, raw @ w.T + b, atol=1e-12)

    def test_zero_projection_leaves_pe(self, rng):
        pe = rng.normal(size=(6, 5))
        out = embed_patches(Tensor(np.zeros((6, 4))), Tensor(np.zeros((5, 4))),
                            Tensor(np.zeros(5)), Tensor(pe))
        assert np.array_equal(out.data, pe)

    def test_identical_patches_embed_identically(self, rng):
        raw = np.tile(rng.normal(size=(1, 4)), (3, 1))
        out = embed_patches(Tensor(raw), Tensor(rng.normal(size=(5, 4))),
                            Tensor(rng.normal(size=5)), Tensor(np.zeros((3, 5))))
        assert np.array_equal(out.data[0], out.data[1])
        assert np.array_equal(out.data[0], out.data[2])


class TestAttention:
    def test_single_token_returns_value(self, rng):
        q = rng.normal(size=(1, 4))
        v = rng.normal(size=(1, 4))
        out = self_attention(Tensor(q), Tensor(rng.normal(size=(1, 4))), Tensor(v))
        assert np.allclose(out.data, v, atol=1e-12)

    def test_equal_scores_give_column_mean(self, rng):
        # zero queries make every score zero, so weights are uniform
        v = rng.normal(size=(5, 3))
        out = self_attention(Tensor(np.zeros((5, 4))), Tensor(rng.normal(size=(5, 4))), Tensor(v))
        assert np.allclose(out.data, np.tile(v.mean(axis=0), (5, 1)), atol=1e-12)

    def test_three_token_case_matches_reference(self):
        q = np.array([[0.5, -1.0], [2.0, 0.0], [-0.5, 1.5]])
        k = np.array([[1.0, 0.5], [-1.0, 2.0], [0.0, -1.0]])
        v = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, -1.0]])
        frozen = np.array([
            [1.5806504027937476, -0.5806504027937478],
            [1.1413053380337081, -0.14130533803370818],
            [0.1405251265449501, 0.8594748734550499],
        ])
        out = self_attention(Tensor(q), Tensor(k), Tensor(v)).data
        assert np.allclose(out, frozen, atol=1e-12)
        assert np.allclose(out, oracles.reference_attention(q, k, v), atol=1e-12)

    def test_single_head_equals_self_attention_with_projection(self, rng):
        d, n = 6, 5
        layer = random_layer(d, 8, rng)
        x = rng.normal(size=(n, d))
        out = multi_head_attention(Tensor(x), layer, heads=1).data
        q = np.einsum("ik,kj->ij", x, layer.wq.data)
        k = np.einsum("ik,kj->ij", x, layer.wk.data)
        v = np.einsum("ik,kj->ij", x, layer.wv.data)
        expected = np.einsum(
            "ik,kj->ij",
            self_attention(Tensor(q), Tensor(k), Tensor(v)).data,
            layer.wo.data,
        )
        assert np.allclose(out, expected, atol=1e-12)

    def test_permutation_equivariance_exact(self, rng):
        d, n = 8, 7
        layer = random_layer(d, 8, rng)
        x = rng.normal(size=(n, d))
        perm = rng.permutation(n)
        out = multi_head_attention(Tensor(x), layer, heads=2).data
        out_perm = multi_head_attention(Tensor(x[perm]), layer, heads=2).data
        assert np.array_equal(out[perm], out_perm)

    def test_permutation_equivariance_many_seeds(self):
        for seed in range(10):
            r = np.random.default_rng(seed)
            layer = random_layer(6, 4, r)
            x = r.normal(size=(5, 6))
            perm = r.permutation(5)
            out = multi_head_attention(Tensor(x), layer, heads=3).data
            out_perm = multi_head_attention(Tensor(x[perm]), layer, heads=3).data
            assert np.array_equal(out[perm], out_perm), f"seed {seed}"


class TestEncoderBlock:
    def test_zero_weights_identity(self, rng):
        x = rng.normal(size=(4, 6))
        out = encoder_block(Tensor(x), zero_layer(6, 8), heads=2, eps=1e-6)
        assert np.array_equal(out.data, x)

    def test_without_attn_residual_not_identity(self, rng):
        x = rng.normal(size=(4, 6))
        out = encoder_block(Tensor(x), zero_layer(6, 8), heads=2, eps=1e-6,
                            attn_residual=False)
        assert np.array_equal(out.data, np.zeros((4, 6)))

    def test_output_shape_preserved(self, rng):
        layer = random_layer(6, 12, rng)
        x = rng.normal(size=(3, 5, 6))
        assert encoder_block(Tensor(x), layer, heads=2, eps=1e-6).shape == (3, 5, 6)

    def test_block_gradient_matches_finite_differences(self, rng):
        d, mlp, n = 4, 6, 3
        layer = random_layer(d, mlp, rng)
        x0 = rng.normal(size=(n, d))
        probe = rng.normal(size=(n, d))

        xt = Tensor(x0, requires_grad=True)
        with Tape() as tape:
            loss = mean(mul(encoder_block(xt, layer, 2, 1e-6), Tensor(probe)))
            tape.backward(loss)

        def f(x):
            return float(mean(mul(encoder_block(Tensor(x), layer, 2, 1e-6),
                                  Tensor(probe))).data)

        numeric = oracles.numeric_gradient(f, x0)
        assert oracles.relative_error(xt.grad, numeric) <= 1e-6

        # spot-check one weight matrix too
        num_wq = oracles.numeric_gradient(
            lambda w: float(mean(mul(encoder_block(
                Tensor(x0), _layer_with(layer, "wq", w), 2, 1e-6), Tensor(probe))).data),
            layer.wq.data)
        assert oracles.relative_error(layer.wq.grad, num_wq) <= 1e-6


def _layer_with(layer, field, array):
    clone = LayerParams()
    for name, _ in _LAYER_FIELDS:
        attr = name.replace(".", "_")
        src = getattr(layer, attr)
        clone.set(name, Tensor(array) if attr == field else Tensor(src.data))
    return clone


class TestLocalEncoding:
    def test_perturbing_one_group_leaves_others_unchanged(self, rng):
        layer = random_layer(6, 8, rng)
        groups = rng.normal(size=(4, 3, 6))
        base = encode_stack(Tensor(groups), [layer], heads=2, eps=1e-6).data
        perturbed = groups.copy()
        perturbed[1] += rng.normal(size=(3, 6))
        out = encode_stack(Tensor(perturbed), [layer], heads=2, eps=1e-6).data
        assert not np.array_equal(out[1], base[1])
        for g in (0, 2, 3):
            assert np.array_equal(out[g], base[g])

    def test_identical_groups_encode_identically(self, rng):
        layer = random_layer(6, 8, rng)
        one = rng.normal(size=(3, 6))
        groups = np.stack([one, one, one])
        out = encode_stack(Tensor(groups), [layer], heads=2, eps=1e-6).data
        assert np.array_equal(out[0], out[1])
        assert np.array_equal(out[0], out[2])


class TestFusion:
    def test_zero_fusion_branch_passes_patch_tokens(self, rng):
        cfg = tiny_config()
        params = ModelParams.initialize(cfg, seed=0, dtype=np.float64)
        params.fusion_weight.data[...] = 0.0
        params.fusion_bias.data[...] = 0.0
        params.fusion_beta.data[...] = 0.0
        patch_tokens = rng.normal(size=(cfg.n_patch, cfg.global_dim))
        sub_tokens = rng.normal(size=(cfg.n_patch, cfg.n_subpatch_per_patch, cfg.local_dim))
        out = fuse(Tensor(patch_tokens), Tensor(sub_tokens), params, cfg.ln_eps)
        assert np.array_equal(out.data, patch_tokens)

    def test_gradient_reaches_subpatch_pixels(self):
        cfg = tiny_config()
        model = DocBinFormer(cfg, seed=3, dtype=np.float64)
        x = Tensor(np.random.default_rng(0).random((16, 16)), requires_grad=True)
        with Tape() as tape:
            loss = mean(model.forward_tensor(x))
            tape.backward(loss)
        assert np.all(np.abs(x.grad) > 0)


class TestDecode:
    def test_zero_output_head_gives_half(self, rng):
        cfg = tiny_config()
        params = ModelParams.initialize(cfg, seed=1, dtype=np.float64)
        params.output_weight.data[...] = 0.0
        params.output_bias.data[...] = 0.0
        tokens = rng.normal(size=(cfg.n_patch, cfg.global_dim))
        out = decode(Tensor(tokens), params, cfg)
        assert np.all(out.data == 0.5)


class TestModel:
    def test_forward_shape_and_range(self, rng):
        model = DocBinFormer(tiny_config(), seed=0)
        out = model.forward(rng.random((16, 16)))
        assert out.shape == (16, 16)
        assert np.all(out > 0) and np.all(out < 1)

    def test_forward_deterministic(self, rng):
        model = DocBinFormer(tiny_config(), seed=0)
        x = rng.random((16, 16))
        assert np.array_equal(model.forward(x), model.forward(x))

    def test_same_seed_same_params(self):
        a = ModelParams.initialize(tiny_config(), seed=5)
        b = ModelParams.initialize(tiny_config(), seed=5)
        for (_, ta, _), (_, tb, _) in zip(a.named(), b.named()):
            assert np.array_equal(ta.data, tb.data)

    def test_batched_forward_matches_single(self, rng):
        model = DocBinFormer(tiny_config(), seed=0)
        tiles = rng.random((3, 16, 16)).astype(np.float32)
        batched = model.forward(tiles)
        for i in range(3):
            single = model.forward(tiles[i])
            assert np.allclose(batched[i], single, atol=1e-6)

    def test_wrong_tile_size_rejected(self):
        model = DocBinFormer(tiny_config(), seed=0)
        with pytest.raises(ShapeError):
            model.forward(np.zeros((8, 8)))

    def test_binarize_values(self, rng):
        model = DocBinFormer(tiny_config(), seed=0)
        out = model.binarize(rng.random((16, 16)))
        assert set(np.unique(out)) <= {0.0, 1.0}


class TestParams:
    def test_audit_names_offending_tensor(self):
        cfg = tiny_config()
        params = ModelParams.initialize(cfg, seed=0)
        params._tensors["fusion.weight"] = Tensor(np.zeros((3, 3)), requires_grad=True)
        with pytest.raises(ShapeError) as err:
            params.audit()
        assert "fusion.weight" in str(err.value)

    def test_arithmetic_count_matches_allocation(self):
        for cfg in (tiny_config(), tiny_config(width=32), ablation_config(4, height=32, width=32)):
            params = ModelParams.initialize(cfg, seed=0)
            assert parameter_count(cfg).total == params.total_size()

    def test_component_sums_to_total(self):
        pc = parameter_count(default_config())
        assert pc.embeddings + pc.global_encoder + pc.local_encoder + pc.decoder == pc.total

    def test_ln_init(self):
        params = ModelParams.initialize(tiny_config(), seed=0)
        layer = params.global_layers[0]
        assert np.all(layer.ln1_gamma.data == 1.0)
        assert np.all(layer.ln1_beta.data == 0.0)

    def test_decay_flags(self):
        params = ModelParams.initialize(tiny_config(), seed=0)
        flags = {name: decays for name, _, decays in params.named()}
        assert flags["global.0.wq"] and flags["fusion.weight"] and flags["output.weight"]
        assert not flags["pe.patch"] and not flags["global.0.ln1.gamma"]
        assert not flags["global.0.mlp.b1"] and not flags["output.bias"]


class TestConfig:
    def test_invalid_configs_rejected(self):
        with pytest.raises(ConfigError):
            ModelConfig(height=100)  # not divisible by patch 16
        with pytest.raises(ConfigError):
            ModelConfig(subpatch_size=5)
        with pytest.raises(ConfigError):
            ModelConfig(subpatch_size=16)  # must be strictly smaller than patch
        with pytest.raises(ConfigError):
            ModelConfig(global_dim=770)  # not divisible by 8 heads
        with pytest.raises(ConfigError):
            ModelConfig(channels=3)

    def test_ablation_row_3_is_default(self):
        assert ablation_config(3) == default_config()

    def test_unknown_ablation_row(self):
        with pytest.raises(ConfigError):
            ablation_config(9)

    def test_expected_shapes_cover_tiny(self):
        cfg = tiny_config()
        shapes = expected_shapes(cfg)
        assert shapes["pe.patch"] == (4, 16)
        assert shapes["pe.subpatch"] == (4, 8)
        assert shapes["fusion.weight"] == (32, 16)


def test_full_model_gradient_spot_check():
    """Finite differences against backward for a sample of parameters."""
    cfg = tiny_config()
    model = DocBinFormer(cfg, seed=7, dtype=np.float64)
    rng = np.random.default_rng(11)
    x = rng.random((16, 16))
    probe = rng.normal(size=(16, 16))

    def loss_value():
        return float(mean(mul(model.forward_tensor(Tensor(x)), Tensor(probe))).data)

    model.params.zero_grads()
    with Tape() as tape:
        loss = mean(mul(model.forward_tensor(Tensor(x)), Tensor(probe)))
        tape.backward(loss)

    h = 1e-6
    named = list(model.params.named())
    for pick in range(12):
        name, tensor, _ = named[rng.integers(len(named))]
        flat = tensor.data.ravel()
        idx = int(rng.integers(flat.size))
        orig = flat[idx]
        flat[idx] = orig + h
        fp = loss_value()
        flat[idx] = orig - h
        fm = loss_value()
        flat[idx] = orig
        numeric = (fp - fm) / (2 * h)
        analytic = tensor.grad.ravel()[idx]
        # near-zero gradients sit at the finite-difference noise floor,
        # so allow a small absolute tolerance alongside the relative one
        err = abs(analytic - numeric)
        assert err <= max(1e-5 * max(abs(numeric), abs(analytic)), 1e-10), f"{name}[{idx}]"
