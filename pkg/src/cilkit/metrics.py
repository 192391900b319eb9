"""Accuracy bookkeeping and the confusion/forgetting error split.

A misclassified test sample whose predicted class shares the true class's
meta-class counts as a confusion error (the classes are similar by
construction); any other misclassification counts as a forgetting error. The
two counts partition the errors exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


def decompose_errors(true_labels, predicted_labels,
                     meta: dict[int, int]) -> tuple[int, int]:
    """Returns (confusion_errors, forgetting_errors) over the misclassified
    samples; correct predictions count in neither."""
    true_labels = np.asarray(true_labels, dtype=np.int64)
    predicted_labels = np.asarray(predicted_labels, dtype=np.int64)
    if true_labels.shape != predicted_labels.shape:
        raise InputError("label arrays must have matching shapes")
    confusion = forgetting = 0
    for t, p in zip(true_labels.tolist(), predicted_labels.tolist()):
        if t == p:
            continue
        if t not in meta or p not in meta:
            raise InputError(f"class {t if t not in meta else p} has no meta-class")
        if meta[t] == meta[p]:
            confusion += 1
        else:
            forgetting += 1
    return confusion, forgetting


def mean_accuracy(per_class_accuracy) -> float:
    """Unweighted mean over the classes learned so far."""
    values = list(per_class_accuracy)
    if not values:
        raise InputError("need at least one class accuracy")
    return float(np.mean(values))


@dataclass
class RoundReport:
    """Evaluation record for one continual-learning round."""

    round_index: int
    new_classes: list[int]
    per_class_accuracy: dict[int, float]
    mean_accuracy: float
    confusion_errors: int
    forgetting_errors: int
    similar_pairs: dict[int, list[int]] = field(default_factory=dict)
    expert_classes: list[int] | None = None
    expert_final_loss: float | None = None
    train_final_loss: float = 0.0
    wall_clock_seconds: float = 0.0

    def to_json_dict(self) -> dict:
        """Deterministic serialized form. Wall-clock time is intentionally
        left out so reruns of the same config are byte-identical."""
        return {
            "round": self.round_index,
            "new_classes": [int(c) for c in self.new_classes],
            "per_class_accuracy": {str(c): self.per_class_accuracy[c]
                                   for c in sorted(self.per_class_accuracy)},
            "mean_accuracy": self.mean_accuracy,
            "confusion_errors": self.confusion_errors,
            "forgetting_errors": self.forgetting_errors,
            "similar_pairs": {str(c): [int(o) for o in self.similar_pairs[c]]
                              for c in sorted(self.similar_pairs)},
            "expert_classes": (None if self.expert_classes is None
                               else [int(c) for c in self.expert_classes]),
            "expert_final_loss": self.expert_final_loss,
            "train_final_loss": self.train_final_loss,
        }


def summarize_rounds(reports_by_seed: dict[int, list["RoundReport"]]) -> list[dict]:
    """Per-round means over seeds (accuracy and both error counts), plus the
    per-seed values for transparency."""
    if not reports_by_seed:
        return []
    n_rounds = {len(r) for r in reports_by_seed.values()}
    if len(n_rounds) != 1:
        raise InputError("runs have differing round counts")
    summary = []
    seeds = sorted(reports_by_seed)
    for i in range(n_rounds.pop()):
        rows = [reports_by_seed[s][i] for s in seeds]
        summary.append({
            "round": rows[0].round_index,
            "mean_accuracy": float(np.mean([r.mean_accuracy for r in rows])),
            "confusion_errors": float(np.mean([r.confusion_errors for r in rows])),
            "forgetting_errors": float(np.mean([r.forgetting_errors for r in rows])),
            "per_seed_accuracy": {str(s): reports_by_seed[s][i].mean_accuracy
                                  for s in seeds},
        })
    return summary
