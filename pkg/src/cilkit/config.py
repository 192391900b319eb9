"""Experiment configs: a TOML document with dataset/model/method sections.

Validation is strict so experiments stay auditable: unknown keys are
rejected, every value is type-checked, and all cross-field invariants are
verified before anything runs. Error messages start with the offending
field's path (e.g. "method.lambda1: ...").
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, replace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .data import Dataset, RoundSpec, SyntheticSpec, dataset_from_samples, generate, load_csv, schedule_rounds
from .engine import INFERENCE_RULES, METHODS, MethodConfig
from .errors import ConfigError, InputError
from .training import TrainSchedule

_SCHEDULE_POLICIES = ("id_order", "split_similar", "shuffled")
_REQUIRED = object()


@dataclass(frozen=True)
class DatasetConfig:
    kind: str
    classes_per_round: int
    schedule_policy: str
    schedule_seed: int
    synthetic: SyntheticSpec | None = None
    train_path: str | None = None
    test_path: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    output_dir: str
    seeds: tuple[int, ...]
    dataset: DatasetConfig
    hidden_dims: tuple[int, ...]
    method: MethodConfig  # template; the per-run seed is substituted later

    def method_for_seed(self, seed: int) -> MethodConfig:
        return replace(self.method, seed=int(seed))


class _Section:
    """Pop-as-you-go view over one TOML table; leftovers are unknown keys."""

    def __init__(self, path: str, table: dict):
        if not isinstance(table, dict):
            raise ConfigError(f"{path}: must be a table")
        self.path = path
        self.table = dict(table)

    def take(self, key, types, default=_REQUIRED, check=None, what=""):
        where = f"{self.path}.{key}" if self.path else key
        if key not in self.table:
            if default is _REQUIRED:
                raise ConfigError(f"{where}: missing required key")
            return default
        value = self.table.pop(key)
        if isinstance(value, bool) and bool not in _tupled(types):
            raise ConfigError(f"{where}: expected {what or _name(types)}, got a boolean")
        if not isinstance(value, _tupled(types)):
            raise ConfigError(f"{where}: expected {what or _name(types)}, "
                              f"got {type(value).__name__}")
        if check is not None and not check(value):
            raise ConfigError(f"{where}: invalid value {value!r}")
        return value

    def take_number(self, key, default=_REQUIRED, check=None):
        v = self.take(key, (int, float), default=default, what="a number")
        if v is default and default is not _REQUIRED:
            return v
        v = float(v)
        if check is not None and not check(v):
            raise ConfigError(f"{self.path}.{key}: invalid value {v!r}")
        return v

    def take_list(self, key, item_type, default=_REQUIRED, check_item=None):
        where = f"{self.path}.{key}" if self.path else key
        v = self.take(key, list, default=default, what="an array")
        if v is default and default is not _REQUIRED:
            return v
        out = []
        for i, item in enumerate(v):
            if isinstance(item, bool) or not isinstance(item, _tupled(item_type)):
                raise ConfigError(f"{where}[{i}]: expected {_name(item_type)}")
            if check_item is not None and not check_item(item):
                raise ConfigError(f"{where}[{i}]: invalid value {item!r}")
            out.append(item)
        return out

    def finish(self):
        if self.table:
            extra = sorted(self.table)
            where = f"{self.path}.{extra[0]}" if self.path else extra[0]
            raise ConfigError(f"{where}: unknown key")


def _tupled(types):
    return types if isinstance(types, tuple) else (types,)


def _name(types):
    return " or ".join(t.__name__ for t in _tupled(types))


def _parse_dataset(table: dict) -> DatasetConfig:
    sec = _Section("dataset", table)
    kind = sec.take("kind", str, check=lambda v: v in ("synthetic", "csv"))
    classes_per_round = sec.take("classes_per_round", int, check=lambda v: v >= 1)
    policy = sec.take("schedule_policy", str, default="id_order",
                      check=lambda v: v in _SCHEDULE_POLICIES)
    schedule_seed = sec.take("schedule_seed", int, default=0, check=lambda v: v >= 0)
    synthetic = None
    train_path = test_path = None
    if kind == "synthetic":
        try:
            synthetic = SyntheticSpec(
                meta_classes=sec.take("meta_classes", int, check=lambda v: v >= 1),
                classes_per_meta=sec.take("classes_per_meta", int, check=lambda v: v >= 1),
                background_classes=sec.take("background_classes", int, default=0,
                                            check=lambda v: v >= 0),
                dim=sec.take("dim", int, check=lambda v: v >= 1),
                intra_spread=sec.take_number("intra_spread", check=lambda v: v > 0),
                inter_spread=sec.take_number("inter_spread", check=lambda v: v > 0),
                noise_std=sec.take_number("noise_std", check=lambda v: v > 0),
                train_per_class=sec.take("train_per_class", int, check=lambda v: v >= 1),
                test_per_class=sec.take("test_per_class", int, check=lambda v: v >= 1),
                seed=sec.take("data_seed", int, default=0, check=lambda v: v >= 0),
            )
        except InputError as exc:
            raise ConfigError(f"dataset: {exc}") from None
    else:
        train_path = sec.take("train_path", str)
        test_path = sec.take("test_path", str)
    sec.finish()
    return DatasetConfig(kind, classes_per_round, policy, schedule_seed,
                         synthetic, train_path, test_path)


def _parse_method(table: dict) -> MethodConfig:
    sec = _Section("method", table)
    schedule_kwargs = dict(
        epochs=sec.take("epochs", int, default=100, check=lambda v: v >= 1),
        batch_size=sec.take("batch_size", int, default=128, check=lambda v: v >= 1),
        learning_rate=sec.take_number("learning_rate", default=0.1,
                                      check=lambda v: v > 0),
        decay_fractions=tuple(sec.take_list("decay_fractions", (int, float),
                                            default=[],
                                            check_item=lambda v: 0 < v < 1)),
        expert_full_epochs=sec.take("expert_full_epochs", int, default=80,
                                    check=lambda v: v >= 1),
        expert_balanced_epochs=sec.take("expert_balanced_epochs", int, default=40,
                                        check=lambda v: v >= 0),
    )
    kwargs = dict(
        method=sec.take("method", str, default="distill_old_plus_expert",
                        check=lambda v: v in METHODS),
        m_similar=sec.take("m_similar", int, default=1, check=lambda v: v >= 0),
        lambda1=sec.take_number("lambda1", default=1.0, check=lambda v: v >= 0),
        lambda2=sec.take_number("lambda2", default=1.0, check=lambda v: v >= 0),
        temperature_new=sec.take_number("temperature_new", default=2.0,
                                        check=lambda v: v >= 1),
        temperature_old=sec.take_number("temperature_old", default=2.0,
                                        check=lambda v: v >= 1),
        inference=sec.take("inference", str, default="softmax",
                           check=lambda v: v in INFERENCE_RULES),
        memory_k=sec.take("memory_k", int, default=2000, check=lambda v: v >= 0),
        l2_normalize_features=sec.take("l2_normalize_features", bool, default=False),
        exemplar_selection=sec.take("exemplar_selection", str, default="herding",
                                    check=lambda v: v in ("herding", "random")),
        expert_warm_start=sec.take("expert_warm_start", bool, default=True),
        head_init_scale=sec.take_number("head_init_scale", default=0.05,
                                        check=lambda v: v >= 0),
    )
    sec.finish()
    try:
        return MethodConfig(schedule=TrainSchedule(**schedule_kwargs), **kwargs)
    except InputError as exc:
        raise ConfigError(f"method: {exc}") from None


def parse_config(text: str) -> ExperimentConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config: not valid TOML: {exc}") from None
    top = _Section("", doc)
    output_dir = top.take("output_dir", str)
    seeds = tuple(top.take_list("seeds", int, check_item=lambda v: v >= 0))
    if not seeds:
        raise ConfigError("seeds: must not be empty")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds: entries must be distinct")
    dataset = _parse_dataset(top.take("dataset", dict))
    model_sec = _Section("model", top.take("model", dict))
    hidden_dims = tuple(model_sec.take_list("hidden_dims", int,
                                            check_item=lambda v: v >= 1))
    model_sec.finish()
    if not hidden_dims:
        raise ConfigError("model.hidden_dims: must not be empty")
    method = _parse_method(top.take("method", dict, default={}))
    top.finish()
    return ExperimentConfig(output_dir, seeds, dataset, hidden_dims, method)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    return parse_config(text)


def build_dataset(cfg: DatasetConfig) -> Dataset:
    if cfg.kind == "synthetic":
        return generate(cfg.synthetic)
    train = load_csv(cfg.train_path)
    test = load_csv(cfg.test_path)
    return dataset_from_samples(train, test)


def build_rounds(cfg: DatasetConfig, dataset: Dataset) -> list[RoundSpec]:
    return schedule_rounds(dataset, cfg.classes_per_round, cfg.schedule_policy,
                           cfg.schedule_seed)


def config_echo(cfg: ExperimentConfig) -> dict:
    """Canonical dict form of the parsed config, echoed into results.json."""
    dataset: dict = {
        "kind": cfg.dataset.kind,
        "classes_per_round": cfg.dataset.classes_per_round,
        "schedule_policy": cfg.dataset.schedule_policy,
        "schedule_seed": cfg.dataset.schedule_seed,
    }
    if cfg.dataset.kind == "synthetic":
        s = cfg.dataset.synthetic
        dataset.update({
            "meta_classes": s.meta_classes,
            "classes_per_meta": s.classes_per_meta,
            "background_classes": s.background_classes,
            "dim": s.dim,
            "intra_spread": s.intra_spread,
            "inter_spread": s.inter_spread,
            "noise_std": s.noise_std,
            "train_per_class": s.train_per_class,
            "test_per_class": s.test_per_class,
            "data_seed": s.seed,
        })
    else:
        dataset.update({"train_path": cfg.dataset.train_path,
                        "test_path": cfg.dataset.test_path})
    m, sched = cfg.method, cfg.method.schedule
    return {
        "output_dir": cfg.output_dir,
        "seeds": list(cfg.seeds),
        "dataset": dataset,
        "model": {"hidden_dims": list(cfg.hidden_dims)},
        "method": {
            "method": m.method,
            "m_similar": m.m_similar,
            "lambda1": m.lambda1,
            "lambda2": m.lambda2,
            "temperature_new": m.temperature_new,
            "temperature_old": m.temperature_old,
            "inference": m.inference,
            "memory_k": m.memory_k,
            "epochs": sched.epochs,
            "batch_size": sched.batch_size,
            "learning_rate": sched.learning_rate,
            "decay_fractions": list(sched.decay_fractions),
            "expert_full_epochs": sched.expert_full_epochs,
            "expert_balanced_epochs": sched.expert_balanced_epochs,
            "l2_normalize_features": m.l2_normalize_features,
            "exemplar_selection": m.exemplar_selection,
            "expert_warm_start": m.expert_warm_start,
            "head_init_scale": m.head_init_scale,
        },
    }
