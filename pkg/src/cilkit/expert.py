"""Temporary expert classifier: trains on the round's new classes plus their
selected confusable old classes, then serves as a distillation teacher.

Training runs in two phases to cope with the heavy class imbalance between
full new-class data and the handful of stored old-class exemplars: first
ordinary epochs over everything, then fine-tuning epochs where every class
contributes exactly the minimum per-class count, re-drawn each epoch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, StateError
from .losses import DistillSpec, cross_entropy
from .nn import MlpClassifier, forward, init_mlp
from .training import TrainSchedule, epoch_learning_rate, run_sgd_epoch


@dataclass
class ExpertBundle:
    """Trained expert plus the global class id behind each of its outputs."""

    model: MlpClassifier
    class_list: list[int]
    phase_epochs: tuple[int, int]
    final_loss: float


@dataclass(frozen=True)
class Teacher:
    """Frozen model whose outputs map into the student's logit positions."""

    model: MlpClassifier
    index_map: tuple[int, ...]
    temperature: float

    def spec_for(self, batch: np.ndarray) -> DistillSpec:
        logits, _ = forward(self.model, batch)
        return DistillSpec(logits, self.index_map, self.temperature)


def balanced_indices(counts: list[int], rng: np.random.Generator) -> list[np.ndarray]:
    """Per-class row indices for one balanced epoch: every class contributes
    exactly min(counts) rows, sampled without replacement."""
    floor = min(counts)
    return [rng.choice(c, size=floor, replace=False) for c in counts]


def _assemble(data_by_class: dict[int, np.ndarray], class_list: list[int]
              ) -> tuple[np.ndarray, np.ndarray, list[int]]:
    parts, labels, counts = [], [], []
    for pos, class_id in enumerate(class_list):
        rows = data_by_class[class_id]
        parts.append(rows)
        labels.append(np.full(rows.shape[0], pos, dtype=np.int64))
        counts.append(rows.shape[0])
    return np.vstack(parts), np.concatenate(labels), counts


def train_expert(new_data: dict[int, np.ndarray],
                 old_exemplars: dict[int, np.ndarray],
                 hidden_dims, schedule: TrainSchedule, seed: int,
                 base_model: MlpClassifier | None = None,
                 warm_start: bool = True) -> ExpertBundle:
    """Build and train the expert on new-class data plus old exemplars.

    Output order is sorted new class ids followed by sorted old class ids.
    With warm_start the hidden layers are copied from base_model and only the
    head is freshly initialized; otherwise the whole network starts from the
    seeded init. old_exemplars may be empty, in which case the expert is just
    a plain classifier over the new classes.
    """
    if not new_data:
        raise InputError("need at least one new class")
    overlap = set(new_data) & set(old_exemplars)
    if overlap:
        raise InputError(f"classes cannot be both new and old: {sorted(overlap)}")
    for c, rows in list(new_data.items()) + list(old_exemplars.items()):
        if np.asarray(rows).shape[0] == 0:
            raise InputError(f"class {c} has no samples")

    class_list = sorted(new_data) + sorted(old_exemplars)
    data = {**new_data, **old_exemplars}
    dim = next(iter(data.values())).shape[1]
    dims = [dim, *hidden_dims, len(class_list)]
    model = init_mlp(dims, [seed, 0])
    if warm_start and base_model is not None:
        if base_model.layer_dims[:-1] != dims[:-1]:
            raise StateError(
                f"base model dims {base_model.layer_dims[:-1]} incompatible "
                f"with expert dims {dims[:-1]}")
        for i in range(model.n_layers - 1):
            model.weights[i] = base_model.weights[i].copy()
            model.biases[i] = base_model.biases[i].copy()

    rng = np.random.default_rng([seed, 1])
    full_epochs = schedule.expert_full_epochs
    balanced_epochs = schedule.expert_balanced_epochs
    total = full_epochs + balanced_epochs

    x_all, y_all, counts = _assemble(data, class_list)
    losses: list[float] = []
    for epoch in range(full_epochs):
        lr = epoch_learning_rate(schedule.learning_rate, epoch, total,
                                 schedule.decay_fractions)
        losses = run_sgd_epoch(
            model, x_all, schedule.batch_size, lr, rng,
            lambda logits, idx: cross_entropy(logits, y_all[idx]))

    class_slices = np.split(np.arange(x_all.shape[0]), np.cumsum(counts)[:-1])
    for epoch in range(full_epochs, total):
        picks = balanced_indices(counts, rng)
        rows = np.concatenate([sl[p] for sl, p in zip(class_slices, picks)])
        x_e, y_e = x_all[rows], y_all[rows]
        lr = epoch_learning_rate(schedule.learning_rate, epoch, total,
                                 schedule.decay_fractions)
        losses = run_sgd_epoch(
            model, x_e, schedule.batch_size, lr, rng,
            lambda logits, idx: cross_entropy(logits, y_e[idx]))

    return ExpertBundle(model, class_list, (full_epochs, balanced_epochs),
                        float(np.mean(losses)))


def expert_teacher_spec(bundle: ExpertBundle, student_class_order,
                        temperature: float) -> Teacher:
    """Route each expert output to its position in the student's logit
    vector; the Teacher then produces per-batch distillation specs."""
    positions = {int(c): i for i, c in enumerate(student_class_order)}
    try:
        index_map = tuple(positions[c] for c in bundle.class_list)
    except KeyError as exc:
        raise StateError(f"expert class {exc.args[0]} absent from student order") from None
    return Teacher(bundle.model, index_map, temperature)
