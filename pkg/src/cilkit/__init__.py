"""Class-incremental continual learning with discriminative expert
distillation, herding exemplar memory, and a confusion/forgetting benchmark
harness."""

from .data import Dataset, LabeledSample, RoundSpec, SyntheticSpec, generate, load_csv, schedule_rounds
from .engine import (
    EngineState,
    MethodConfig,
    initial_state,
    load_model_checkpoint,
    predict,
    run_experiment,
    run_experiment_with_state,
    run_round,
    save_model_checkpoint,
)
from .expert import ExpertBundle, Teacher, expert_teacher_spec, train_expert
from .losses import DistillSpec, LossWeights, combined_loss, cross_entropy, distillation_loss, temperature_softmax
from .memory import ExemplarMemory, herding_select
from .metrics import RoundReport, decompose_errors, mean_accuracy
from .nn import MlpClassifier, backward, expand_head, features, forward, init_mlp, sgd_step
from .similarity import class_centres, select_similar
from .training import TrainSchedule

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DistillSpec",
    "EngineState",
    "ExemplarMemory",
    "ExpertBundle",
    "LabeledSample",
    "LossWeights",
    "MethodConfig",
    "MlpClassifier",
    "RoundReport",
    "RoundSpec",
    "SyntheticSpec",
    "Teacher",
    "TrainSchedule",
    "backward",
    "class_centres",
    "combined_loss",
    "cross_entropy",
    "decompose_errors",
    "distillation_loss",
    "expand_head",
    "expert_teacher_spec",
    "features",
    "forward",
    "generate",
    "herding_select",
    "init_mlp",
    "initial_state",
    "load_csv",
    "load_model_checkpoint",
    "mean_accuracy",
    "predict",
    "run_experiment",
    "run_experiment_with_state",
    "run_round",
    "save_model_checkpoint",
    "schedule_rounds",
    "select_similar",
    "sgd_step",
    "temperature_softmax",
    "train_expert",
]
