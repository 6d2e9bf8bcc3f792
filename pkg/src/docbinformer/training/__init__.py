"""Optimization, the training loop, and checkpointing."""

from .checkpoint import (
    FORMAT_VERSION,
    MAGIC,
    Checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from .loop import TrainResult, leave_one_out_split, train
from .optim import AdamWState, TrainConfig, adamw_step, mse_loss

__all__ = [
    "AdamWState",
    "Checkpoint",
    "FORMAT_VERSION",
    "MAGIC",
    "TrainConfig",
    "TrainResult",
    "adamw_step",
    "leave_one_out_split",
    "load_checkpoint",
    "mse_loss",
    "save_checkpoint",
    "train",
]
