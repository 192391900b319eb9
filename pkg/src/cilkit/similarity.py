"""Class-centre representations and the confusable-old-class assignment.

For each new class the closest old class centres (Euclidean) are claimed
greedily over all (new, old) pairs in ascending distance, and an old class
may be claimed at most once per round. Every new class therefore receives the
same number of old classes whenever enough old classes exist; otherwise the
late lists come up short.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError


def class_centres(features_by_class: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
    """Arithmetic mean feature vector per class."""
    centres = {}
    for class_id, rows in features_by_class.items():
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise InputError(f"class {class_id} has no samples")
        centres[int(class_id)] = rows.mean(axis=0)
    return centres


def select_similar(new_centres: dict[int, np.ndarray],
                   old_centres: dict[int, np.ndarray],
                   m_per_new: int) -> dict[int, list[int]]:
    """Assign to each new class its nearest old classes without reuse.

    All (new, old) centre pairs are visited in ascending distance (ties by
    lower new id, then lower old id); a pair is accepted iff the new class
    still needs classes and the old class is unclaimed.
    """
    if m_per_new < 0:
        raise InputError(f"m_per_new must be >= 0, got {m_per_new}")
    assigned: dict[int, list[int]] = {int(c): [] for c in new_centres}
    if m_per_new == 0 or not old_centres:
        return assigned
    pairs = []
    for new_id, nc in new_centres.items():
        for old_id, oc in old_centres.items():
            d = float(np.linalg.norm(np.asarray(nc) - np.asarray(oc)))
            pairs.append((d, int(new_id), int(old_id)))
    pairs.sort()
    taken: set[int] = set()
    for _, new_id, old_id in pairs:
        if old_id in taken or len(assigned[new_id]) >= m_per_new:
            continue
        assigned[new_id].append(old_id)
        taken.add(old_id)
    return assigned


def l2_normalize_rows(rows: np.ndarray) -> np.ndarray:
    """Row-wise L2 normalization; zero rows are left as zeros."""
    rows = np.asarray(rows, dtype=np.float64)
    norms = np.linalg.norm(rows, axis=-1, keepdims=True)
    return rows / np.where(norms == 0.0, 1.0, norms)
