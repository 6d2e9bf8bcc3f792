"""Loss and optimizer for binarization training.

The optimizer is Adam with decoupled weight decay: the decay term is added
to the update after the adaptive step is formed, never folded into the
gradient moments. Decay applies only to 2-D weight matrices; biases,
positional embeddings, and layer-norm parameters are exempt.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, mean, square, sub
from ..errors import ConfigError


@dataclass
class TrainConfig:
    """Hyperparameters for one training run."""

    learning_rate: float = 1.5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.05
    batch_size: int = 16
    epochs: int = 200
    seed: int = 0
    checkpoint_every: int = 0
    max_steps: int = 0

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {value}")
        if self.eps <= 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be non-negative, got {self.weight_decay}")
        if self.batch_size <= 0:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if self.epochs <= 0:
            raise ConfigError(f"epochs must be positive, got {self.epochs}")
        if self.checkpoint_every < 0:
            raise ConfigError(
                f"checkpoint_every must be non-negative, got {self.checkpoint_every}"
            )
        if self.max_steps < 0:
            raise ConfigError(f"max_steps must be non-negative, got {self.max_steps}")


def mse_loss(prediction: Tensor, target) -> Tensor:
    """Mean squared error over every element of the prediction."""
    if not isinstance(target, Tensor):
        target = Tensor(np.asarray(target, dtype=prediction.data.dtype))
    return mean(square(sub(prediction, target)))


class AdamWState:
    """First/second moment estimates plus the shared step counter."""

    def __init__(self, params=None):
        self.m = {}
        self.v = {}
        self.step = 0
        if params is not None:
            for name, tensor, _ in params.named():
                self.m[name] = np.zeros_like(tensor.data)
                self.v[name] = np.zeros_like(tensor.data)

    @classmethod
    def from_arrays(cls, m: dict, v: dict, step: int) -> "AdamWState":
        state = cls()
        state.m = dict(m)
        state.v = dict(v)
        state.step = int(step)
        return state


def adamw_step(params, state: AdamWState, config: TrainConfig) -> None:
    """Apply one optimizer update in place from accumulated gradients.

    Bias-corrected moments drive the adaptive step; the weight-decay term
    ``weight_decay * theta`` is added separately for parameters flagged as
    decaying, so decay strength is independent of the gradient scale.
    """
    state.step += 1
    t = state.step
    lr = config.learning_rate
    b1, b2 = config.beta1, config.beta2
    correction1 = 1.0 - b1**t
    correction2 = 1.0 - b2**t
    for name, tensor, decays in params.named():
        grad = tensor.grad
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * grad
        v *= b2
        v += (1.0 - b2) * (grad * grad)
        m_hat = m / correction1
        v_hat = v / correction2
        update = m_hat / (np.sqrt(v_hat) + config.eps)
        if decays and config.weight_decay:
            update = update + config.weight_decay * tensor.data
        tensor.data -= lr * update
