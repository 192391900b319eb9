"""The continual-learning loop.

Each round after the first expands the previous classifier's head for the
incoming classes (warm start) and trains it on the round's data plus every
stored exemplar. The loss is cross-entropy plus, depending on the method,
distillation from the frozen previous-round classifier and from a temporary
expert trained on the new classes and their most confusable old classes,
with all teacher logits recomputed per minibatch. Afterwards the new classes
are herded into the exemplar memory and the shared budget is rebalanced.

Methods:
    finetune                 cross-entropy only, no memory, no teachers
    distill_old_only         old-classifier distillation + exemplar replay
    distill_old_plus_expert  the above plus the expert teacher

Checkpoint layout (little-endian): int64 layer-dim count, the int64 layer
dims, then per layer the row-major float64 weight matrix followed by the
float64 bias vector.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, RoundSpec
from .errors import InputError, NumericError, ShapeError, StateError
from .expert import ExpertBundle, Teacher, expert_teacher_spec, train_expert
from .losses import LossWeights, combined_loss
from .memory import ExemplarMemory
from .metrics import RoundReport, decompose_errors, mean_accuracy
from .nn import MlpClassifier, expand_head, features, forward, init_mlp
from .similarity import class_centres, l2_normalize_rows, select_similar
from .training import TrainSchedule, epoch_learning_rate, run_sgd_epoch

METHODS = ("finetune", "distill_old_only", "distill_old_plus_expert")
INFERENCE_RULES = ("softmax", "nearest_mean_exemplars")

# rng stream tags; each (seed, round, phase) triple is an independent stream
_PHASE_INIT = 0
_PHASE_EXPAND = 1
_PHASE_EXPERT = 2
_PHASE_MAIN = 3
_PHASE_MEMORY = 4


def derive_seed(*parts: int) -> int:
    """Stable child seed for a (seed, round, phase...) path."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


@dataclass(frozen=True)
class MethodConfig:
    """Everything a single run needs beyond the dataset and architecture."""

    method: str = "distill_old_plus_expert"
    m_similar: int = 1
    lambda1: float = 1.0
    lambda2: float = 1.0
    temperature_new: float = 2.0
    temperature_old: float = 2.0
    inference: str = "softmax"
    memory_k: int = 2000
    schedule: TrainSchedule = field(default_factory=TrainSchedule)
    seed: int = 0
    l2_normalize_features: bool = False
    exemplar_selection: str = "herding"
    expert_warm_start: bool = True
    head_init_scale: float = 0.05

    def __post_init__(self):
        if self.method not in METHODS:
            raise InputError(f"unknown method {self.method!r}")
        if self.inference not in INFERENCE_RULES:
            raise InputError(f"unknown inference rule {self.inference!r}")
        if self.m_similar < 0:
            raise InputError("m_similar must be >= 0")
        for name in ("lambda1", "lambda2"):
            if getattr(self, name) < 0 or not np.isfinite(getattr(self, name)):
                raise InputError(f"{name} must be finite and >= 0")
        for name in ("temperature_new", "temperature_old"):
            if getattr(self, name) < 1.0:
                raise InputError(f"{name} must be >= 1")
        if self.memory_k < 0:
            raise InputError("memory_k must be >= 0")
        if self.seed < 0:
            raise InputError("seed must be >= 0")
        if self.head_init_scale < 0:
            raise InputError("head_init_scale must be >= 0")

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.lambda1, self.lambda2)


@dataclass
class RoundLog:
    """Training-side record of one round, kept on the state for reporting."""

    round_index: int
    batch_losses: list[float]
    similar_pairs: dict[int, list[int]]
    expert_classes: list[int] | None
    expert_final_loss: float | None

    @property
    def final_loss(self) -> float:
        return self.batch_losses[-1] if self.batch_losses else float("nan")


@dataclass
class EngineState:
    """Mutable continual-learning state carried across rounds."""

    hidden_dims: tuple[int, ...]
    l2_normalize: bool
    model: MlpClassifier | None = None
    class_order: list[int] = field(default_factory=list)
    memory: ExemplarMemory | None = None
    last_round_log: RoundLog | None = None


def initial_state(hidden_dims, cfg: MethodConfig) -> EngineState:
    memory = ExemplarMemory(cfg.memory_k, selection=cfg.exemplar_selection,
                            seed=derive_seed(cfg.seed, 0, _PHASE_MEMORY))
    return EngineState(tuple(int(h) for h in hidden_dims),
                       cfg.l2_normalize_features, memory=memory)


def _maybe_normalize(state: EngineState, rows: np.ndarray) -> np.ndarray:
    return l2_normalize_rows(rows) if state.l2_normalize else rows


def _feature_rows(state: EngineState, model: MlpClassifier, rows: np.ndarray) -> np.ndarray:
    return _maybe_normalize(state, features(model, rows))


def _select_confusable(state: EngineState, old_model: MlpClassifier,
                       rnd: RoundSpec, m_similar: int) -> dict[int, list[int]]:
    """Nearest old classes per new class, through the old feature extractor."""
    old_feats = {}
    for c in state.memory.class_ids():
        stored = state.memory.stored_inputs(c)
        if stored.shape[0]:
            old_feats[c] = _feature_rows(state, old_model, stored)
    new_feats = {c: _feature_rows(state, old_model, rnd.train_data[c])
                 for c in rnd.new_classes}
    if not old_feats:
        return {int(c): [] for c in rnd.new_classes}
    return select_similar(class_centres(new_feats), class_centres(old_feats),
                          m_similar)


def run_round(state: EngineState, rnd: RoundSpec, cfg: MethodConfig) -> EngineState:
    """Execute one round in place and return the state."""
    new_ids = [int(c) for c in rnd.new_classes]
    collisions = set(new_ids) & set(state.class_order)
    if collisions:
        raise InputError(f"classes already learned: {sorted(collisions)}")
    for c in new_ids:
        if rnd.train_data[c].shape[0] == 0:
            raise InputError(f"class {c} has no training data")

    sched = cfg.schedule
    similar_pairs: dict[int, list[int]] = {}
    expert_bundle: ExpertBundle | None = None

    if state.model is None:
        dim = rnd.train_data[new_ids[0]].shape[1]
        model = init_mlp([dim, *state.hidden_dims, len(new_ids)],
                         derive_seed(cfg.seed, rnd.round_index, _PHASE_INIT))
        class_order = list(new_ids)
        x_train, y_train = _stack_training_set(rnd, new_ids, class_order, state, cfg)
        old_teacher = expert_teacher = None
    else:
        old_model = state.model
        if cfg.method == "distill_old_plus_expert":
            similar_pairs = _select_confusable(state, old_model, rnd, cfg.m_similar)
            selected_old = sorted({o for lst in similar_pairs.values() for o in lst})
            expert_bundle = train_expert(
                {c: rnd.train_data[c] for c in new_ids},
                {c: state.memory.stored_inputs(c) for c in selected_old},
                state.hidden_dims, sched,
                derive_seed(cfg.seed, rnd.round_index, _PHASE_EXPERT),
                base_model=old_model, warm_start=cfg.expert_warm_start)
        model = expand_head(old_model, len(new_ids), cfg.head_init_scale,
                            derive_seed(cfg.seed, rnd.round_index, _PHASE_EXPAND))
        class_order = state.class_order + new_ids
        x_train, y_train = _stack_training_set(rnd, new_ids, class_order, state, cfg)
        if cfg.method == "finetune":
            old_teacher = expert_teacher = None
        else:
            old_teacher = Teacher(old_model, tuple(range(old_model.output_dim)),
                                  cfg.temperature_old)
            expert_teacher = (expert_teacher_spec(expert_bundle, class_order,
                                                  cfg.temperature_new)
                              if expert_bundle is not None else None)

    weights = cfg.weights

    def batch_loss(logits, idx):
        rows = x_train[idx]
        old_spec = old_teacher.spec_for(rows) if old_teacher else None
        expert_spec = expert_teacher.spec_for(rows) if expert_teacher else None
        return combined_loss(logits, y_train[idx], old_spec, expert_spec, weights)

    rng = np.random.default_rng([cfg.seed, rnd.round_index, _PHASE_MAIN])
    batch_losses: list[float] = []
    try:
        for epoch in range(sched.epochs):
            lr = epoch_learning_rate(sched.learning_rate, epoch, sched.epochs,
                                     sched.decay_fractions)
            batch_losses.extend(
                run_sgd_epoch(model, x_train, sched.batch_size, lr, rng, batch_loss))
    except NumericError as exc:
        raise NumericError(f"round {rnd.round_index}: {exc}") from exc

    state.model = model
    state.class_order = class_order
    if cfg.method != "finetune":
        for c in new_ids:
            feats = _feature_rows(state, model, rnd.train_data[c])
            state.memory.admit_class(c, feats, rnd.train_data[c])
        state.memory.rebalance(len(class_order))
    state.last_round_log = RoundLog(
        rnd.round_index, batch_losses, similar_pairs,
        None if expert_bundle is None else list(expert_bundle.class_list),
        None if expert_bundle is None else expert_bundle.final_loss)
    return state


def _stack_training_set(rnd: RoundSpec, new_ids, class_order, state: EngineState,
                        cfg: MethodConfig) -> tuple[np.ndarray, np.ndarray]:
    """Round training set: new data plus, for distill methods, every stored
    exemplar; labels are positions in the student's output order."""
    position = {c: i for i, c in enumerate(class_order)}
    parts, labels = [], []
    for c in new_ids:
        rows = rnd.train_data[c]
        parts.append(rows)
        labels.append(np.full(rows.shape[0], position[c], dtype=np.int64))
    if state.model is not None and cfg.method != "finetune":
        for c in sorted(state.memory.class_ids()):
            rows = state.memory.stored_inputs(c)
            if rows.shape[0]:
                parts.append(rows)
                labels.append(np.full(rows.shape[0], position[c], dtype=np.int64))
    return np.vstack(parts), np.concatenate(labels)


def predict(state: EngineState, batch: np.ndarray, rule: str) -> np.ndarray:
    """Class ids for a batch under the given inference rule; score ties go to
    the lowest class id."""
    if state.model is None:
        raise StateError("no trained model")
    if rule == "softmax":
        logits, _ = forward(state.model, batch)
        sorted_ids = sorted(state.class_order)
        cols = [state.class_order.index(c) for c in sorted_ids]
        scores = logits[:, cols]
    elif rule == "nearest_mean_exemplars":
        if state.memory is None or state.memory.total_stored() == 0:
            raise StateError("nearest-mean inference needs stored exemplars")
        sorted_ids = [c for c in sorted(state.memory.class_ids())
                      if state.memory.stored_inputs(c).shape[0]]
        means = np.vstack([
            _feature_rows(state, state.model, state.memory.stored_inputs(c)).mean(axis=0)
            for c in sorted_ids])
        feats = _feature_rows(state, state.model, np.asarray(batch, dtype=np.float64))
        dists = np.linalg.norm(feats[:, None, :] - means[None, :, :], axis=2)
        scores = -dists
    else:
        raise InputError(f"unknown inference rule {rule!r}")
    picks = np.argmax(scores, axis=1)  # first max wins -> lowest class id
    ids = np.asarray(sorted_ids, dtype=np.int64)
    return ids[picks]


def run_experiment(dataset: Dataset, rounds: list[RoundSpec], cfg: MethodConfig,
                   hidden_dims=(32, 32)) -> list[RoundReport]:
    """Run all rounds sequentially, evaluating over every learned class after
    each one. Deterministic given the config seed."""
    reports, _ = run_experiment_with_state(dataset, rounds, cfg, hidden_dims)
    return reports


def run_experiment_with_state(dataset: Dataset, rounds: list[RoundSpec],
                              cfg: MethodConfig, hidden_dims=(32, 32)
                              ) -> tuple[list[RoundReport], EngineState]:
    """run_experiment plus the final engine state (for memory snapshots and
    checkpointing)."""
    if not rounds:
        raise InputError("need at least one round")
    state = initial_state(hidden_dims, cfg)
    reports = []
    for rnd in rounds:
        started = time.perf_counter()
        state = run_round(state, rnd, cfg)
        per_class = {}
        all_true, all_pred = [], []
        for c in sorted(state.class_order):
            test_rows = dataset.test[c]
            pred = predict(state, test_rows, cfg.inference)
            per_class[c] = float(np.mean(pred == c))
            all_true.extend([c] * test_rows.shape[0])
            all_pred.extend(int(p) for p in pred)
        confusion, forgetting = decompose_errors(all_true, all_pred, dataset.meta)
        log = state.last_round_log
        reports.append(RoundReport(
            round_index=rnd.round_index,
            new_classes=list(rnd.new_classes),
            per_class_accuracy=per_class,
            mean_accuracy=mean_accuracy(per_class.values()),
            confusion_errors=confusion,
            forgetting_errors=forgetting,
            similar_pairs=log.similar_pairs,
            expert_classes=log.expert_classes,
            expert_final_loss=log.expert_final_loss,
            train_final_loss=log.final_loss,
            wall_clock_seconds=time.perf_counter() - started,
        ))
    return reports, state


def save_model_checkpoint(model: MlpClassifier, path) -> None:
    """Write the documented little-endian binary layout."""
    with open(path, "wb") as fh:
        dims = np.asarray(model.layer_dims, dtype="<i8")
        np.asarray([dims.size], dtype="<i8").tofile(fh)
        dims.tofile(fh)
        for w, b in zip(model.weights, model.biases):
            np.ascontiguousarray(w, dtype="<f8").tofile(fh)
            np.ascontiguousarray(b, dtype="<f8").tofile(fh)


def load_model_checkpoint(path) -> MlpClassifier:
    """Read a checkpoint written by save_model_checkpoint."""
    with open(path, "rb") as fh:
        header = np.fromfile(fh, dtype="<i8", count=1)
        if header.size != 1 or header[0] < 2:
            raise ShapeError(f"{path}: malformed checkpoint header")
        n_dims = int(header[0])
        dims = [int(d) for d in np.fromfile(fh, dtype="<i8", count=n_dims)]
        if len(dims) != n_dims or any(d < 1 for d in dims):
            raise ShapeError(f"{path}: malformed layer dims {dims}")
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            w = np.fromfile(fh, dtype="<f8", count=fan_in * fan_out)
            b = np.fromfile(fh, dtype="<f8", count=fan_out)
            if w.size != fan_in * fan_out or b.size != fan_out:
                raise ShapeError(f"{path}: truncated checkpoint")
            weights.append(w.reshape(fan_in, fan_out))
            biases.append(b)
        if fh.read(1):
            raise ShapeError(f"{path}: trailing bytes in checkpoint")
    return MlpClassifier(dims, weights, biases)
