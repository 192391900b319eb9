"""Synthetic confusable-class data, CSV ingestion, and round scheduling.

The synthetic generator builds groups of mutually similar classes: group
centres are spread over a hypercube of side `inter_spread`, the classes of a
group sit inside a Euclidean ball of radius `intra_spread` around their group
centre, and samples are isotropic Gaussians around each class centre. Extra
"background" classes each form their own singleton group, so only the
grouped classes are confusable with one another. Round schedules can split a
group's classes across many rounds, which is the scenario where new classes
collide with similar, earlier-learned ones.

CSV schema (UTF-8, comma-separated, '.' decimal, header mandatory):
    f0,...,f{d-1},label,meta
with d real features plus integer class and meta-class ids per row.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import CsvParseError, CsvSchemaError, InputError


@dataclass(frozen=True)
class LabeledSample:
    features: np.ndarray
    class_id: int
    meta_class_id: int


@dataclass(frozen=True)
class SyntheticSpec:
    meta_classes: int
    classes_per_meta: int
    dim: int
    intra_spread: float        # radius of each group's class-centre ball
    inter_spread: float        # side of the hypercube holding group centres
    noise_std: float
    train_per_class: int
    test_per_class: int
    seed: int
    background_classes: int = 0

    def __post_init__(self):
        if self.meta_classes < 1 or self.classes_per_meta < 1:
            raise InputError("need at least one meta-class and one class per meta")
        if self.total_classes < 2:
            raise InputError("need at least two classes in total")
        if self.dim < 1:
            raise InputError("dim must be >= 1")
        if not (self.inter_spread > self.intra_spread > 0.0):
            raise InputError(
                f"need inter_spread > intra_spread > 0, got "
                f"{self.inter_spread} vs {self.intra_spread}"
            )
        if self.noise_std <= 0.0:
            raise InputError("noise_std must be > 0")
        if self.train_per_class < 1 or self.test_per_class < 1:
            raise InputError("need at least one train and one test sample per class")
        if self.background_classes < 0:
            raise InputError("background_classes must be >= 0")

    @property
    def total_classes(self) -> int:
        return self.meta_classes * self.classes_per_meta + self.background_classes

    @property
    def total_metas(self) -> int:
        return self.meta_classes + self.background_classes


@dataclass
class Dataset:
    """Per-class train/test sample matrices plus the class -> meta-class map."""

    dim: int
    train: dict[int, np.ndarray]
    test: dict[int, np.ndarray]
    meta: dict[int, int]

    @property
    def class_ids(self) -> list[int]:
        return sorted(self.train.keys())


@dataclass(frozen=True)
class RoundSpec:
    round_index: int
    new_classes: list[int]
    train_data: dict[int, np.ndarray]


def _uniform_ball(rng: np.random.Generator, radius: float, dim: int) -> np.ndarray:
    """Uniform draw from the Euclidean ball of the given radius."""
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    r = radius * rng.uniform() ** (1.0 / dim)
    return r * direction


def generate(spec: SyntheticSpec) -> Dataset:
    """Deterministic synthetic dataset; everything derives from spec.seed.

    Classes 0 .. G*g-1 belong to the G confusable groups (g consecutive ids
    per group); the remaining `background_classes` ids each get a fresh
    singleton meta id.
    """
    rng = np.random.default_rng(spec.seed)
    half = spec.inter_spread / 2.0
    class_centres: dict[int, np.ndarray] = {}
    meta: dict[int, int] = {}
    for m in range(spec.meta_classes):
        meta_centre = rng.uniform(-half, half, size=spec.dim)
        for j in range(spec.classes_per_meta):
            class_id = m * spec.classes_per_meta + j
            class_centres[class_id] = meta_centre + _uniform_ball(
                rng, spec.intra_spread, spec.dim)
            meta[class_id] = m
    first_bg = spec.meta_classes * spec.classes_per_meta
    for b in range(spec.background_classes):
        class_id = first_bg + b
        class_centres[class_id] = rng.uniform(-half, half, size=spec.dim)
        meta[class_id] = spec.meta_classes + b
    train, test = {}, {}
    for class_id in sorted(class_centres):
        centre = class_centres[class_id]
        train[class_id] = centre + spec.noise_std * rng.normal(
            size=(spec.train_per_class, spec.dim))
        test[class_id] = centre + spec.noise_std * rng.normal(
            size=(spec.test_per_class, spec.dim))
    return Dataset(spec.dim, train, test, meta)


def load_csv(path) -> list[LabeledSample]:
    """Parse one CSV file of the documented schema into samples."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvSchemaError(f"{path}: empty file") from None
        d = len(header) - 2
        expected = [f"f{i}" for i in range(d)] + ["label", "meta"]
        if d < 1 or header != expected:
            raise CsvSchemaError(
                f"{path}: header must be f0,...,f{{d-1}},label,meta, got {header}")
        samples = []
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 2:
                raise CsvSchemaError(
                    f"{path}: line {line_number} has {len(row)} fields, expected {d + 2}")
            try:
                feats = np.array([float(v) for v in row[:d]], dtype=np.float64)
                label = int(row[d])
                meta = int(row[d + 1])
            except ValueError as exc:
                raise CsvParseError(line_number, str(exc)) from None
            samples.append(LabeledSample(feats, label, meta))
    if not samples:
        raise CsvSchemaError(f"{path}: no data rows")
    return samples


def save_csv(samples: list[LabeledSample], path) -> None:
    """Write samples in the load_csv schema (17-significant-digit floats)."""
    if not samples:
        raise InputError("nothing to write")
    d = len(samples[0].features)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"f{i}" for i in range(d)] + ["label", "meta"])
        for s in samples:
            writer.writerow([format(v, ".17g") for v in s.features]
                            + [s.class_id, s.meta_class_id])


def dataset_from_samples(train_samples: list[LabeledSample],
                         test_samples: list[LabeledSample]) -> Dataset:
    """Assemble a Dataset from separately loaded train and test samples."""
    dims = {len(s.features) for s in train_samples + test_samples}
    if len(dims) != 1:
        raise CsvSchemaError(f"inconsistent feature widths: {sorted(dims)}")
    dim = dims.pop()
    meta: dict[int, int] = {}
    for s in train_samples + test_samples:
        prev = meta.setdefault(s.class_id, s.meta_class_id)
        if prev != s.meta_class_id:
            raise CsvSchemaError(
                f"class {s.class_id} mapped to meta ids {prev} and {s.meta_class_id}")
    train: dict[int, list[np.ndarray]] = {}
    test: dict[int, list[np.ndarray]] = {}
    for s in train_samples:
        train.setdefault(s.class_id, []).append(s.features)
    for s in test_samples:
        test.setdefault(s.class_id, []).append(s.features)
    missing = set(train) ^ set(test)
    if missing:
        raise CsvSchemaError(f"classes without both splits: {sorted(missing)}")
    return Dataset(
        dim,
        {c: np.vstack(rows) for c, rows in sorted(train.items())},
        {c: np.vstack(rows) for c, rows in sorted(test.items())},
        {c: meta[c] for c in sorted(train)},
    )


def schedule_rounds(dataset: Dataset, classes_per_round: int,
                    policy: str = "id_order", seed: int = 0) -> list[RoundSpec]:
    """Chunk the dataset's classes into rounds.

    id_order: ascending class ids. split_similar: round-robin over meta
    groups so same-group classes land as far apart as possible. shuffled:
    seeded permutation (used to vary the class order across runs).
    """
    if classes_per_round < 1:
        raise InputError("classes_per_round must be >= 1")
    ids = dataset.class_ids
    if policy == "id_order":
        order = ids
    elif policy == "split_similar":
        queues: dict[int, list[int]] = {}
        for c in ids:
            queues.setdefault(dataset.meta[c], []).append(c)
        order = []
        while any(queues.values()):
            for m in sorted(queues):
                if queues[m]:
                    order.append(queues[m].pop(0))
    elif policy == "shuffled":
        rng = np.random.default_rng(seed)
        order = [ids[i] for i in rng.permutation(len(ids))]
    else:
        raise InputError(f"unknown schedule policy {policy!r}")
    rounds = []
    for r, start in enumerate(range(0, len(order), classes_per_round), start=1):
        chunk = order[start:start + classes_per_round]
        rounds.append(RoundSpec(r, chunk, {c: dataset.train[c] for c in chunk}))
    return rounds
