"""Fixed-budget exemplar store with herding selection.

Each stored class keeps its exemplars in herding order, so shrinking the
per-class quota is always a prefix truncation and earlier picks are never
displaced by later ones. Admitting a class recomputes the shared per-class
quota floor(K / classes) and trims every stored class to it, which keeps the
total at or below the budget after every operation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, StateError


def herding_select(features: np.ndarray, m: int) -> list[int]:
    """Greedy herding order over feature rows.

    With mu the column mean, the k-th pick minimizes
    || mu - (sum of chosen features + candidate) / k ||_2 over the remaining
    rows; ties go to the lowest row index. Returns min(m, n) indices.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise InputError("features must be a nonempty 2-D array")
    if m < 1:
        raise InputError(f"m must be >= 1, got {m}")
    n = features.shape[0]
    mu = features.mean(axis=0)
    chosen: list[int] = []
    chosen_sum = np.zeros_like(mu)
    remaining = np.ones(n, dtype=bool)
    for k in range(1, min(m, n) + 1):
        pick, best = -1, np.inf
        # scalar norms per candidate: each distance depends only on its own
        # row, so exact ties resolve to the lowest index regardless of n
        for i in range(n):
            if not remaining[i]:
                continue
            d = float(np.linalg.norm(mu - (chosen_sum + features[i]) / k))
            if d < best:
                pick, best = i, d
        chosen.append(pick)
        chosen_sum += features[pick]
        remaining[pick] = False
    return chosen


def random_select(n: int, m: int, seed) -> list[int]:
    """Seeded random exemplar order; ablation fallback for herding."""
    if n < 1:
        raise InputError("need at least one sample")
    if m < 1:
        raise InputError(f"m must be >= 1, got {m}")
    rng = np.random.default_rng(seed)
    return [int(i) for i in rng.permutation(n)[: min(m, n)]]


@dataclass
class _ClassStore:
    indices: list[int]
    inputs: np.ndarray  # raw sample rows, aligned with indices

    def truncate(self, quota: int) -> None:
        if len(self.indices) > quota:
            self.indices = self.indices[:quota]
            self.inputs = self.inputs[:quota]


@dataclass
class ExemplarMemory:
    """Budgeted per-class store; `selection` is 'herding' or 'random'."""

    budget_k: int
    selection: str = "herding"
    seed: int = 0
    per_class: dict[int, _ClassStore] = field(default_factory=dict)

    def __post_init__(self):
        if self.budget_k < 0:
            raise InputError(f"budget must be >= 0, got {self.budget_k}")
        if self.selection not in ("herding", "random"):
            raise InputError(f"unknown selection policy {self.selection!r}")

    def class_ids(self) -> list[int]:
        return list(self.per_class.keys())

    def stored_inputs(self, class_id: int) -> np.ndarray:
        return self.per_class[class_id].inputs

    def stored_indices(self) -> dict[int, list[int]]:
        return {c: list(s.indices) for c, s in self.per_class.items()}

    def total_stored(self) -> int:
        return sum(len(s.indices) for s in self.per_class.values())

    def quota(self, total_classes: int) -> int:
        if total_classes < 1:
            raise InputError("total_classes must be >= 1")
        return self.budget_k // total_classes

    def admit_class(self, class_id: int, features: np.ndarray, samples: np.ndarray) -> None:
        """Select exemplars for a class not yet stored. The quota is
        recomputed for the enlarged class count and already-stored classes
        are trimmed to it, so the budget holds after the admission."""
        class_id = int(class_id)
        if class_id in self.per_class:
            raise StateError(f"class {class_id} already stored")
        samples = np.asarray(samples, dtype=np.float64)
        features = np.asarray(features, dtype=np.float64)
        if samples.shape[0] != features.shape[0]:
            raise InputError("features and samples must have matching row counts")
        q = self.quota(len(self.per_class) + 1)
        for store in self.per_class.values():
            store.truncate(q)
        if q == 0:
            self.per_class[class_id] = _ClassStore([], samples[:0])
            return
        if self.selection == "herding":
            order = herding_select(features, q)
        else:
            order = random_select(samples.shape[0], q, [self.seed, class_id])
        self.per_class[class_id] = _ClassStore(order, samples[order])

    def rebalance(self, total_classes: int) -> None:
        """Trim every stored list to the first floor(K / total_classes) picks."""
        q = self.quota(total_classes)
        for store in self.per_class.values():
            store.truncate(q)

    def to_json_dict(self) -> dict[str, list[int]]:
        """Checkpoint form: class id -> selected sample indices, herding order."""
        return {str(c): list(s.indices) for c, s in self.per_class.items()}
