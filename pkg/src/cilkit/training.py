"""Seeded minibatch SGD plumbing shared by the main and expert trainers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericError
from .nn import MlpClassifier, backward, forward, sgd_step


@dataclass(frozen=True)
class TrainSchedule:
    """Epoch/batch/learning-rate plan. decay_fractions are fractions of the
    total epoch count past which the rate is multiplied by 0.1 (cumulative).
    The expert phases share the batch size and rate plan."""

    epochs: int = 100
    batch_size: int = 128
    learning_rate: float = 0.1
    decay_fractions: tuple[float, ...] = ()
    expert_full_epochs: int = 80
    expert_balanced_epochs: int = 40

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise InputError("epochs and batch_size must be >= 1")
        if not np.isfinite(self.learning_rate) or self.learning_rate <= 0:
            raise InputError(f"learning_rate must be > 0, got {self.learning_rate}")
        if any(not 0.0 < f < 1.0 for f in self.decay_fractions):
            raise InputError("decay_fractions must lie in (0, 1)")
        if self.expert_full_epochs < 1 or self.expert_balanced_epochs < 0:
            raise InputError("expert epochs must be >= 1 full, >= 0 balanced")


def epoch_learning_rate(base_lr: float, epoch: int, total_epochs: int,
                        decay_fractions) -> float:
    """Step-decayed rate for a 0-based epoch index."""
    steps = sum(1 for f in decay_fractions if epoch >= int(f * total_epochs))
    return base_lr * (0.1 ** steps)


def run_sgd_epoch(model: MlpClassifier, inputs: np.ndarray, batch_size: int,
                  lr: float, rng: np.random.Generator, batch_loss) -> list[float]:
    """One pass over `inputs` in a fresh shuffled order.

    batch_loss(logits, row_indices) must return (scalar loss, d_loss/d_logits)
    for the rows `inputs[row_indices]`. Returns the per-batch losses.
    """
    n = inputs.shape[0]
    perm = rng.permutation(n)
    losses = []
    for start in range(0, n, batch_size):
        idx = perm[start:start + batch_size]
        logits, trace = forward(model, inputs[idx])
        loss, d_logits = batch_loss(logits, idx)
        if not np.isfinite(loss):
            raise NumericError(
                f"non-finite loss {loss} at batch {start // batch_size} "
                f"(lr={lr}); training diverged")
        grads = backward(model, trace, d_logits)
        sgd_step(model, grads, lr)
        losses.append(loss)
    return losses
