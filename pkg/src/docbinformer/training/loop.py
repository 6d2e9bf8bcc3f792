"""Epoch-based training over document tiles.

Pages are cut into model-sized tiles once up front; every epoch shuffles
the pooled tiles with the run's own random generator and walks them in
minibatches. Because the generator state is part of each checkpoint, a run
resumed from disk replays the exact shuffle sequence and reproduces the
uninterrupted run's losses bit for bit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Tape, Tensor
from ..errors import ConfigError, DataError
from ..model import DocBinFormer, ModelConfig, ModelParams
from ..data.tiling import tile
from .checkpoint import load_checkpoint, save_checkpoint
from .optim import AdamWState, TrainConfig, adamw_step, mse_loss


@dataclass
class TrainResult:
    """Outcome of a training run."""

    model: DocBinFormer
    params: ModelParams
    optimizer: AdamWState
    epoch_losses: list = field(default_factory=list)
    step_losses: list = field(default_factory=list)
    checkpoint_paths: list = field(default_factory=list)


def leave_one_out_split(pairs, held_out_year) -> tuple:
    """Split pairs into (training, held-out) by competition year."""
    year = str(held_out_year)
    held_out = [p for p in pairs if p.year == year]
    if not held_out:
        available = sorted({p.year for p in pairs})
        raise DataError(
            f"no samples for held-out year {year!r}; corpus has {available}"
        )
    remaining = [p for p in pairs if p.year != year]
    if not remaining:
        raise DataError(
            f"every sample belongs to year {year!r}; nothing left to train on"
        )
    return remaining, held_out


def _collect_tiles(pairs, size: int, dtype) -> tuple:
    degraded_tiles = []
    gt_tiles = []
    for pair in pairs:
        if pair.degraded.shape != pair.ground_truth.shape:
            raise DataError(
                f"sample {pair.sample_id!r}: degraded shape"
                f" {pair.degraded.shape} does not match ground truth"
                f" {pair.ground_truth.shape}"
            )
        deg = tile(pair.degraded, size=size, pad_value=1.0)
        gt = tile(pair.ground_truth, size=size, pad_value=1.0)
        degraded_tiles.extend(deg.tiles)
        gt_tiles.extend(gt.tiles)
    return (
        np.stack(degraded_tiles).astype(dtype),
        np.stack(gt_tiles).astype(dtype),
    )


def train(
    pairs,
    model_config: ModelConfig,
    train_config: TrainConfig,
    *,
    checkpoint_dir=None,
    resume_from=None,
    epoch_callback=None,
    dtype=np.float32,
) -> TrainResult:
    """Train a binarization model on the given document pairs.

    ``max_steps`` in the training configuration, when non-zero, stops the
    run after that many optimizer updates regardless of the epoch budget.
    ``epoch_callback(epoch_index, mean_loss)`` is invoked after each epoch.
    """
    model_config.validate()
    train_config.validate()
    if model_config.height != model_config.width:
        raise ConfigError(
            "training tiles images to the model's input size, which requires"
            f" height == width; got {model_config.height}x{model_config.width}"
        )
    if not pairs:
        raise DataError("cannot train on an empty list of document pairs")

    if resume_from is not None:
        ckpt = load_checkpoint(resume_from)
        if ckpt.config != model_config:
            raise ConfigError(
                "checkpoint configuration does not match the requested model"
                f" configuration: {ckpt.config} vs {model_config}"
            )
        params, optimizer, rng = ckpt.params, ckpt.optimizer, ckpt.rng
        start_epoch = ckpt.epoch
    else:
        rng = np.random.default_rng(train_config.seed)
        params = ModelParams.initialize(model_config, seed=rng, dtype=dtype)
        optimizer = AdamWState(params)
        start_epoch = 0

    degraded, ground_truth = _collect_tiles(pairs, model_config.height, dtype)
    n_tiles = degraded.shape[0]
    model = DocBinFormer(model_config, params)
    result = TrainResult(model, params, optimizer)

    max_steps = train_config.max_steps
    stop = max_steps and optimizer.step >= max_steps
    for epoch in range(start_epoch, train_config.epochs):
        if stop:
            break
        order = rng.permutation(n_tiles)
        batch_losses = []
        for lo in range(0, n_tiles, train_config.batch_size):
            batch = order[lo:lo + train_config.batch_size]
            params.zero_grads()
            with Tape() as tape:
                prediction = model.forward_tensor(Tensor(degraded[batch]))
                loss = mse_loss(prediction, ground_truth[batch])
                tape.backward(loss)
            adamw_step(params, optimizer, train_config)
            value = float(loss.data)
            batch_losses.append(value)
            result.step_losses.append(value)
            if max_steps and optimizer.step >= max_steps:
                stop = True
                break
        mean_loss = float(np.mean(batch_losses))
        result.epoch_losses.append(mean_loss)
        if epoch_callback is not None:
            epoch_callback(epoch, mean_loss)
        completed = epoch + 1
        if (
            checkpoint_dir is not None
            and train_config.checkpoint_every
            and completed % train_config.checkpoint_every == 0
        ):
            path = os.path.join(checkpoint_dir, f"checkpoint_{completed:04d}.ckpt")
            save_checkpoint(path, params, optimizer, completed, rng)
            result.checkpoint_paths.append(path)

    if checkpoint_dir is not None:
        final_epoch = start_epoch + len(result.epoch_losses)
        path = os.path.join(checkpoint_dir, "checkpoint_final.ckpt")
        save_checkpoint(path, params, optimizer, final_epoch, rng)
        result.checkpoint_paths.append(path)
    return result
