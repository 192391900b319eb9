"""Training objective: cross-entropy, temperature softmax, the two
distillation terms and their weighted combination, all with exact gradients
w.r.t. the student logits.

Distillation is the soft cross-entropy between the teacher's and the
student's temperature-softened output distributions, averaged over the batch.
A DistillSpec carries the teacher logits for one batch plus the index map
that routes each teacher output to its position in the (wider) student logit
vector, so the same code serves both the previous-round classifier and the
temporary expert as teachers. Temperatures enter the gradients only through
the softmax; there is no extra T^2 rescaling of the distillation terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ShapeError

# floor applied inside log() so a zero probability cannot produce -inf
_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class DistillSpec:
    """Teacher logits for one batch, the student positions they map to, and
    the softening temperature (>= 1)."""

    teacher_logits: np.ndarray
    index_map: tuple[int, ...]
    temperature: float

    def __post_init__(self):
        object.__setattr__(self, "teacher_logits",
                           np.asarray(self.teacher_logits, dtype=np.float64))
        object.__setattr__(self, "index_map", tuple(int(i) for i in self.index_map))
        if self.teacher_logits.ndim != 2:
            raise ShapeError("teacher_logits must be a 2-D batch")
        if self.teacher_logits.shape[1] != len(self.index_map):
            raise ShapeError(
                f"index_map length {len(self.index_map)} != teacher width "
                f"{self.teacher_logits.shape[1]}"
            )
        if len(set(self.index_map)) != len(self.index_map):
            raise InputError("index_map entries must be distinct")
        if any(i < 0 for i in self.index_map):
            raise InputError("index_map entries must be nonnegative")
        if not np.isfinite(self.temperature) or self.temperature < 1.0:
            raise InputError(f"temperature must be >= 1, got {self.temperature}")


@dataclass(frozen=True)
class LossWeights:
    """Trade-off coefficients: lambda1 scales the old-classifier term,
    lambda2 the expert term."""

    lambda1: float = 1.0
    lambda2: float = 1.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise InputError(f"{name} must be finite and >= 0, got {v}")


def temperature_softmax(logits: np.ndarray, temperature: float) -> np.ndarray:
    """Row-wise softmax of logits / T, computed with max-subtraction.
    Accepts a vector or a 2-D batch and preserves the shape."""
    if not np.isfinite(temperature) or temperature < 1.0:
        raise InputError(f"temperature must be >= 1, got {temperature}")
    z = np.asarray(logits, dtype=np.float64) / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood of the labels under softmax(logits).
    Returns (loss, d_loss/d_logits); the gradient is (softmax - onehot)/n."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(
            f"logits {logits.shape} and labels {labels.shape} are inconsistent"
        )
    n, t = logits.shape
    if n == 0:
        raise ShapeError("empty batch")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= t:
        raise InputError(f"labels must lie in [0, {t}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    probs = temperature_softmax(logits, 1.0)
    picked = probs[np.arange(n), labels]
    loss = float(-np.log(np.maximum(picked, _LOG_FLOOR)).mean())
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad


def distillation_loss(student_logits: np.ndarray, spec: DistillSpec) -> tuple[float, np.ndarray]:
    """Soft cross-entropy between teacher and student distributions at the
    spec's temperature, averaged over the batch. The gradient w.r.t. the
    mapped student positions is (student_probs - teacher_probs) / (n * T);
    all other positions get an exact zero."""
    student_logits = np.asarray(student_logits, dtype=np.float64)
    if student_logits.ndim != 2:
        raise ShapeError("student_logits must be a 2-D batch")
    n, width = student_logits.shape
    if max(spec.index_map) >= width:
        raise InputError(
            f"index_map entry {max(spec.index_map)} out of range for student "
            f"width {width}"
        )
    if spec.teacher_logits.shape[0] != n:
        raise ShapeError(
            f"teacher batch {spec.teacher_logits.shape[0]} != student batch {n}"
        )
    idx = list(spec.index_map)
    p = temperature_softmax(spec.teacher_logits, spec.temperature)
    p_hat = temperature_softmax(student_logits[:, idx], spec.temperature)
    loss = float(-(p * np.log(np.maximum(p_hat, _LOG_FLOOR))).sum() / n)
    grad = np.zeros_like(student_logits)
    grad[:, idx] = (p_hat - p) / (n * spec.temperature)
    return loss, grad


def combined_loss(student_logits, labels, old_spec: DistillSpec | None,
                  expert_spec: DistillSpec | None, weights: LossWeights
                  ) -> tuple[float, np.ndarray]:
    """Cross-entropy plus lambda1 * old-classifier distillation plus
    lambda2 * expert distillation; absent specs contribute nothing."""
    loss, grad = cross_entropy(student_logits, labels)
    if old_spec is not None:
        l_o, g_o = distillation_loss(student_logits, old_spec)
        loss += weights.lambda1 * l_o
        grad += weights.lambda1 * g_o
    if expert_spec is not None:
        l_n, g_n = distillation_loss(student_logits, expert_spec)
        loss += weights.lambda2 * l_n
        grad += weights.lambda2 * g_n
    return loss, grad
