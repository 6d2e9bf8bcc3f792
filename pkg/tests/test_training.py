"""Tests for the loss, optimizer, checkpoint format, and training loop."""

import os

import numpy as np
import pytest

from docbinformer.autodiff import Tape, Tensor
from docbinformer.data import synthetic_pair
from docbinformer.errors import CheckpointError, ConfigError, DataError
from docbinformer.model import ModelParams, tiny_config
from docbinformer.training import (
    AdamWState,
    TrainConfig,
    adamw_step,
    leave_one_out_split,
    load_checkpoint,
    mse_loss,
    save_checkpoint,
    train,
)


class ParamStub:
    """Minimal stand-in exposing the named() protocol the optimizer uses."""

    def __init__(self, entries):
        self.entries = entries

    def named(self):
        for name, tensor, decays in self.entries:
            yield name, tensor, decays


def make_pairs(count, seed0=0, size=16):
    return [synthetic_pair(size, size, seed=seed0 + i) for i in range(count)]


# ---------------------------------------------------------------------------
# loss


def test_mse_loss_value():
    pred = Tensor(np.array([0.0, 1.0]))
    loss = mse_loss(pred, np.array([1.0, 1.0]))
    assert loss.data == pytest.approx(0.5, abs=1e-15)


def test_mse_loss_gradient():
    pred = Tensor(np.array([0.0, 1.0]), requires_grad=True)
    with Tape() as tape:
        loss = mse_loss(pred, np.array([1.0, 1.0]))
        tape.backward(loss)
    # d/dp mean((p - t)^2) = 2 (p - t) / n
    np.testing.assert_allclose(pred.grad, [-1.0, 0.0], atol=1e-15)


def test_mse_loss_zero_when_equal():
    pred = Tensor(np.full((3, 4), 0.25))
    assert mse_loss(pred, np.full((3, 4), 0.25)).data == 0.0


# ---------------------------------------------------------------------------
# optimizer


def test_adamw_first_step_without_decay():
    # theta = 0, grad = 1: both corrected moments are exactly 1, so the
    # update is 1 / (1 + eps) and theta' = -lr / (1 + 1e-8).
    theta = Tensor(np.array([0.0]), requires_grad=True)
    theta.grad[...] = 1.0
    params = ParamStub([("bias", theta, False)])
    state = AdamWState(params)
    adamw_step(params, state, TrainConfig())
    expected = -1.5e-4 / (1.0 + 1e-8)
    assert theta.data[0] == pytest.approx(expected, abs=1e-12)
    assert state.step == 1


def test_adamw_first_step_pure_decay():
    # theta = 1, grad = 0: the adaptive term vanishes and only decoupled
    # decay moves the weight: theta' = 1 - lr * wd = 1 - 7.5e-6.
    theta = Tensor(np.array([1.0]), requires_grad=True)
    params = ParamStub([("weight", theta, True)])
    state = AdamWState(params)
    adamw_step(params, state, TrainConfig())
    assert theta.data[0] == pytest.approx(1.0 - 7.5e-6, abs=1e-12)


def test_adamw_decay_not_applied_to_exempt_tensors():
    theta = Tensor(np.array([1.0]), requires_grad=True)
    params = ParamStub([("pe", theta, False)])
    state = AdamWState(params)
    adamw_step(params, state, TrainConfig())
    # zero gradient and no decay: the tensor must not move at all
    assert theta.data[0] == 1.0


def test_adamw_two_steps_match_reference_formula():
    rng = np.random.default_rng(5)
    theta = Tensor(rng.normal(size=(3,)), requires_grad=True)
    reference = theta.data.copy()
    grads = [rng.normal(size=(3,)), rng.normal(size=(3,))]
    params = ParamStub([("weight", theta, True)])
    state = AdamWState(params)
    config = TrainConfig(learning_rate=0.01, weight_decay=0.1)
    m = np.zeros(3)
    v = np.zeros(3)
    for t, g in enumerate(grads, start=1):
        theta.grad[...] = g
        adamw_step(params, state, config)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        m_hat = m / (1 - 0.9**t)
        v_hat = v / (1 - 0.999**t)
        reference -= 0.01 * (m_hat / (np.sqrt(v_hat) + 1e-8) + 0.1 * reference)
    np.testing.assert_allclose(theta.data, reference, atol=1e-12)


def test_decay_flags_on_real_parameters():
    params = ModelParams.initialize(tiny_config(), seed=0)
    decaying = {name for name, _, decays in params.named() if decays}
    exempt = {name for name, _, decays in params.named() if not decays}
    assert "patch_embed.weight" in decaying
    assert "global.0.wq" in decaying
    assert "global.0.mlp.w1" in decaying
    assert "output.weight" in decaying
    assert "patch_embed.bias" in exempt
    assert "pe.patch" in exempt
    assert "pe.subpatch" in exempt
    assert "global.0.ln1.gamma" in exempt
    assert "global.0.mlp.b1" in exempt
    assert "fusion.ln.beta" in exempt


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0.0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(beta2=1.0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(max_steps=-1).validate()
    TrainConfig().validate()


# ---------------------------------------------------------------------------
# checkpoint format


def fresh_state(config, seed=0):
    params = ModelParams.initialize(config, seed=seed)
    optimizer = AdamWState(params)
    rng = np.random.default_rng(seed)
    rng.random(7)  # advance so the saved state is not the fresh-seed state
    return params, optimizer, rng


def test_checkpoint_round_trip_is_byte_identical(tmp_path):
    config = tiny_config()
    params, optimizer, rng = fresh_state(config, seed=11)
    optimizer.step = 42
    first = tmp_path / "a.ckpt"
    second = tmp_path / "b.ckpt"
    save_checkpoint(first, params, optimizer, 3, rng)
    ckpt = load_checkpoint(first)
    save_checkpoint(second, ckpt.params, ckpt.optimizer, ckpt.epoch, ckpt.rng)
    assert first.read_bytes() == second.read_bytes()


def test_checkpoint_restores_fields(tmp_path):
    config = tiny_config()
    params, optimizer, rng = fresh_state(config, seed=2)
    optimizer.step = 9
    path = tmp_path / "c.ckpt"
    expected_draw = np.random.Generator(type(rng.bit_generator)())
    expected_draw.bit_generator.state = rng.bit_generator.state
    save_checkpoint(path, params, optimizer, 5, rng)
    ckpt = load_checkpoint(path)
    assert ckpt.config == config
    assert ckpt.epoch == 5
    assert ckpt.optimizer.step == 9
    for name, tensor, _ in params.named():
        got = dict((n, t) for n, t, _ in ckpt.params.named())[name]
        np.testing.assert_array_equal(got.data, tensor.data.astype(np.float32))
        assert got.data.dtype == np.float32
    # the restored generator continues the original stream
    assert ckpt.rng.random() == expected_draw.random()


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOTACKPT" + b"\x00" * 64)
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_checkpoint_bad_version(tmp_path):
    config = tiny_config()
    params, optimizer, rng = fresh_state(config)
    path = tmp_path / "v.ckpt"
    save_checkpoint(path, params, optimizer, 0, rng)
    raw = bytearray(path.read_bytes())
    raw[8:12] = (99).to_bytes(4, "little")
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError, match="version 99"):
        load_checkpoint(path)


def test_checkpoint_truncated(tmp_path):
    config = tiny_config()
    params, optimizer, rng = fresh_state(config)
    path = tmp_path / "t.ckpt"
    save_checkpoint(path, params, optimizer, 0, rng)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path)


def test_checkpoint_trailing_bytes(tmp_path):
    config = tiny_config()
    params, optimizer, rng = fresh_state(config)
    path = tmp_path / "x.ckpt"
    save_checkpoint(path, params, optimizer, 0, rng)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(CheckpointError, match="trailing"):
        load_checkpoint(path)


def test_checkpoint_unknown_tensor_name(tmp_path):
    config = tiny_config()
    params, optimizer, rng = fresh_state(config)
    path = tmp_path / "n.ckpt"
    save_checkpoint(path, params, optimizer, 0, rng)
    raw = path.read_bytes()
    tampered = raw.replace(b"patch_embed.weight", b"patch_embed.weighx", 1)
    assert tampered != raw
    path.write_bytes(tampered)
    with pytest.raises(CheckpointError, match="patch_embed.weighx"):
        load_checkpoint(path)


def test_checkpoint_shape_mismatch_names_tensor(tmp_path):
    import struct

    config = tiny_config()
    params, optimizer, rng = fresh_state(config)
    path = tmp_path / "s.ckpt"
    save_checkpoint(path, params, optimizer, 0, rng)
    raw = path.read_bytes()
    # rewrite the output.bias record (length 64 in the tiny model) as a
    # well-formed record of length 63
    name = b"output.bias"
    marker = struct.pack("<H", len(name)) + name + struct.pack("<Bi", 1, 64)
    idx = raw.index(marker)
    crafted = (struct.pack("<H", len(name)) + name
               + struct.pack("<Bi", 1, 63) + b"\x00" * (63 * 4))
    path.write_bytes(raw[:idx] + crafted + raw[idx + len(marker) + 64 * 4:])
    with pytest.raises(CheckpointError, match="output.bias"):
        load_checkpoint(path)


# ---------------------------------------------------------------------------
# training loop


def test_train_reduces_loss():
    pairs = make_pairs(2)
    result = train(
        pairs,
        tiny_config(),
        TrainConfig(learning_rate=3e-3, batch_size=2, epochs=8, seed=0),
    )
    assert len(result.epoch_losses) == 8
    assert result.epoch_losses[-1] < result.epoch_losses[0]


def test_train_is_deterministic_per_seed():
    pairs = make_pairs(2)
    config = tiny_config()
    tc = TrainConfig(learning_rate=1e-3, batch_size=2, epochs=3, seed=9)
    a = train(pairs, config, tc)
    b = train(pairs, config, tc)
    assert a.step_losses == b.step_losses
    c = train(pairs, config, TrainConfig(
        learning_rate=1e-3, batch_size=2, epochs=3, seed=10))
    assert c.step_losses != a.step_losses


def test_train_max_steps_stops_early():
    pairs = make_pairs(3)
    result = train(
        pairs,
        tiny_config(),
        TrainConfig(learning_rate=1e-3, batch_size=1, epochs=50,
                    seed=0, max_steps=3),
    )
    assert len(result.step_losses) == 3
    assert result.optimizer.step == 3


def test_resume_matches_uninterrupted_run(tmp_path):
    pairs = make_pairs(3)
    config = tiny_config()
    kwargs = dict(learning_rate=2e-3, batch_size=2, seed=4)
    full = train(pairs, config, TrainConfig(epochs=4, **kwargs))
    first = train(pairs, config, TrainConfig(epochs=2, **kwargs),
                  checkpoint_dir=tmp_path)
    resumed = train(
        pairs, config, TrainConfig(epochs=4, **kwargs),
        resume_from=os.path.join(tmp_path, "checkpoint_final.ckpt"),
    )
    assert first.step_losses + resumed.step_losses == full.step_losses
    assert first.epoch_losses + resumed.epoch_losses == full.epoch_losses


def test_resume_rejects_mismatched_config(tmp_path):
    pairs = make_pairs(1)
    train(pairs, tiny_config(),
          TrainConfig(epochs=1, batch_size=1), checkpoint_dir=tmp_path)
    with pytest.raises(ConfigError, match="configuration"):
        train(pairs, tiny_config(mlp_global=64),
              TrainConfig(epochs=2, batch_size=1),
              resume_from=os.path.join(tmp_path, "checkpoint_final.ckpt"))


def test_train_rejects_empty_corpus():
    with pytest.raises(DataError):
        train([], tiny_config(), TrainConfig())


def test_train_rejects_non_square_model():
    with pytest.raises(ConfigError, match="height == width"):
        train(make_pairs(1), tiny_config(width=32), TrainConfig())


def test_epoch_callback_sees_every_epoch():
    seen = []
    train(
        make_pairs(1),
        tiny_config(),
        TrainConfig(learning_rate=1e-3, batch_size=1, epochs=3, seed=0),
        epoch_callback=lambda epoch, loss: seen.append((epoch, loss)),
    )
    assert [e for e, _ in seen] == [0, 1, 2]
    assert all(np.isfinite(loss) for _, loss in seen)


def test_train_tiles_larger_pages():
    # one 32x32 page on a 16x16 model becomes four tiles
    pairs = [synthetic_pair(32, 32, seed=0)]
    result = train(
        pairs,
        tiny_config(),
        TrainConfig(learning_rate=1e-3, batch_size=4, epochs=1, seed=0),
    )
    assert len(result.step_losses) == 1  # 4 tiles in a single batch


# ---------------------------------------------------------------------------
# leave-one-out split


def test_leave_one_out_split():
    pairs = (
        [synthetic_pair(16, 16, seed=i, year="2016") for i in range(2)]
        + [synthetic_pair(16, 16, seed=9, year="2017")]
    )
    remaining, held_out = leave_one_out_split(pairs, "2017")
    assert [p.year for p in held_out] == ["2017"]
    assert [p.year for p in remaining] == ["2016", "2016"]


def test_leave_one_out_split_unknown_year():
    pairs = [synthetic_pair(16, 16, seed=0, year="2016")]
    with pytest.raises(DataError, match="2019"):
        leave_one_out_split(pairs, "2019")


def test_leave_one_out_split_single_year_corpus():
    pairs = [synthetic_pair(16, 16, seed=i, year="2016") for i in range(2)]
    with pytest.raises(DataError, match="nothing left to train"):
        leave_one_out_split(pairs, "2016")
