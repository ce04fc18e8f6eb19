"""Scenario configuration: schema, validation, presets, and YAML loading.

A scenario fully determines an experiment: node label tables, capacities,
utilization ranges, cost model, scheduler constants, strategy, learner, and
dataset source. Every key carrying a physical quantity names its unit
(`..._flops`, `..._bits_per_sec`, `..._sec`) to keep Mb/MB-style ambiguity
out of config files.

Presets mirror the reference experimental setups: even scenarios give each
node 3 or 4 classes, the uneven one varies class counts per node. The label
tables are editable defaults, not normative.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .domain import (
    InvariantViolation,
    LinkProfile,
    ModelSpec,
    NodeProfile,
    SchedulerConstants,
    validate_label_coverage,
)
from .learner import TrainerConfig
from .resources import UtilizationRange
from .strategies import Strategy

DATA_DIR_ENV = "FLCIRC_DATA_DIR"

MNIST_TRAIN_COUNTS = [5923, 6742, 5958, 6131, 5842, 5421, 5918, 6265, 5851, 5949]
CIFAR_TRAIN_COUNTS = [5000] * 10

CNN_MODEL = {"flops_per_sample": 71.57e6, "model_bits": 38.42e6}
RESNET18_MODEL = {"flops_per_sample": 10.65e9, "model_bits": 358.38e6}


class ConfigError(ValueError):
    """A configuration value violated the schema; names the offending field."""

    def __init__(self, fieldname: str, message: str):
        self.fieldname = fieldname
        super().__init__(f"{fieldname}: {message}")


@dataclass(frozen=True)
class DatasetConfig:
    kind: str  # "blobs" | "idx" | "counts-only"
    dim: int = 16
    separation: float = 4.0
    test_per_class: int = 200
    images: str | None = None
    labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    shared_labels: bool = False


@dataclass(frozen=True)
class LearnerConfig:
    kind: str  # "logistic" | "surrogate"
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    surrogate_ceiling: float = 0.95
    surrogate_halfway: float = 500.0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    seed: int
    label_table: np.ndarray  # (n_nodes, n_labels) sample demands
    baseline_compute_flops: np.ndarray  # per node
    baseline_bandwidth_bits_per_sec: float
    compute_utilization: UtilizationRange
    bandwidth_utilization: UtilizationRange
    model: ModelSpec
    constants: SchedulerConstants
    strategy: Strategy
    learner: LearnerConfig
    dataset: DatasetConfig
    accuracy_thresholds: tuple[float, ...]

    @property
    def n_nodes(self) -> int:
        return int(self.label_table.shape[0])

    @property
    def n_labels(self) -> int:
        return int(self.label_table.shape[1])

    def profiles(self) -> list[NodeProfile]:
        return [
            NodeProfile(
                label_counts=self.label_table[i],
                baseline_compute=float(self.baseline_compute_flops[i]),
            )
            for i in range(self.n_nodes)
        ]

    def links(self) -> LinkProfile:
        return LinkProfile.uniform(self.n_nodes, self.baseline_bandwidth_bits_per_sec)

    def with_overrides(
        self,
        seed: int | None = None,
        strategy: Strategy | None = None,
        dataset: DatasetConfig | None = None,
    ) -> "ScenarioConfig":
        return ScenarioConfig(
            name=self.name,
            seed=self.seed if seed is None else seed,
            label_table=self.label_table,
            baseline_compute_flops=self.baseline_compute_flops,
            baseline_bandwidth_bits_per_sec=self.baseline_bandwidth_bits_per_sec,
            compute_utilization=self.compute_utilization,
            bandwidth_utilization=self.bandwidth_utilization,
            model=self.model,
            constants=self.constants,
            strategy=self.strategy if strategy is None else strategy,
            learner=self.learner,
            dataset=self.dataset if dataset is None else dataset,
            accuracy_thresholds=self.accuracy_thresholds,
        )

    def normalized(self) -> dict:
        """Plain-dict view with every default resolved, for display and dumping."""
        return {
            "name": self.name,
            "seed": self.seed,
            "nodes": self.n_nodes,
            "labels": self.n_labels,
            "label_table": self.label_table.tolist(),
            "baseline_compute_flops": self.baseline_compute_flops.tolist(),
            "baseline_bandwidth_bits_per_sec": self.baseline_bandwidth_bits_per_sec,
            "compute_utilization": [
                self.compute_utilization.lower,
                self.compute_utilization.upper,
            ],
            "bandwidth_utilization": [
                self.bandwidth_utilization.lower,
                self.bandwidth_utilization.upper,
            ],
            "model": {
                "flops_per_sample": self.model.flops_per_sample,
                "model_bits": self.model.model_bits,
            },
            "scheduler": {
                "variance_bound": self.constants.variance_bound,
                "idle_wait_sec": self.constants.idle_wait,
                "total_rounds": self.constants.total_rounds,
                "objective_time_offset_sec": self.constants.objective_time_offset,
            },
            "strategy": self.strategy.value,
            "learner": {
                "kind": self.learner.kind,
                "learning_rate": self.learner.trainer.learning_rate,
                "momentum": self.learner.trainer.momentum,
                "batch_size": self.learner.trainer.batch_size,
                "epochs_per_round": self.learner.trainer.epochs_per_round,
                "surrogate_ceiling": self.learner.surrogate_ceiling,
                "surrogate_halfway": self.learner.surrogate_halfway,
            },
            "dataset": {
                "kind": self.dataset.kind,
                "dim": self.dataset.dim,
                "separation": self.dataset.separation,
                "test_per_class": self.dataset.test_per_class,
                "images": self.dataset.images,
                "labels": self.dataset.labels,
                "test_images": self.dataset.test_images,
                "test_labels": self.dataset.test_labels,
                "shared_labels": self.dataset.shared_labels,
            },
            "accuracy_thresholds": list(self.accuracy_thresholds),
        }


def data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, "data"))


def resolve_data_path(name: str | None) -> Path | None:
    if name is None:
        return None
    path = Path(name)
    return path if path.is_absolute() else data_dir() / path


def _require(raw: dict, key: str):
    if key not in raw:
        raise ConfigError(key, "missing required key")
    return raw[key]


def _positive(value, key: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"not a number: {value!r}") from None
    if value <= 0:
        raise ConfigError(key, f"must be positive, got {value}")
    return value


def parse_config(raw: dict, name: str = "config") -> ScenarioConfig:
    """Validate a raw mapping (from YAML or a preset) into a ScenarioConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a mapping")

    table = np.asarray(_require(raw, "label_table"), dtype=np.int64)
    if table.ndim != 2:
        raise ConfigError("label_table", "must be a 2-d table (nodes x labels)")
    n_nodes, n_labels = table.shape
    if n_nodes < 2:
        raise ConfigError("label_table", "at least two nodes are required")
    if n_labels < 2:
        raise ConfigError("label_table", "at least two labels are required")
    if (table < 0).any():
        raise ConfigError("label_table", "sample counts must be nonnegative")
    if (table.sum(axis=0) == 0).any():
        missing = np.flatnonzero(table.sum(axis=0) == 0).tolist()
        raise ConfigError("label_table", f"labels {missing} are held by no node")
    if "nodes" in raw and int(raw["nodes"]) != n_nodes:
        raise ConfigError("nodes", f"disagrees with label_table ({raw['nodes']} vs {n_nodes})")
    if "labels" in raw and int(raw["labels"]) != n_labels:
        raise ConfigError("labels", f"disagrees with label_table ({raw['labels']} vs {n_labels})")

    compute_raw = _require(raw, "baseline_compute_flops")
    if isinstance(compute_raw, (int, float)):
        compute = np.full(n_nodes, _positive(compute_raw, "baseline_compute_flops"))
    else:
        compute = np.array(
            [_positive(v, "baseline_compute_flops") for v in compute_raw], dtype=float
        )
        if compute.size != n_nodes:
            raise ConfigError("baseline_compute_flops", "per-node list has wrong length")

    bandwidth = _positive(
        _require(raw, "baseline_bandwidth_bits_per_sec"), "baseline_bandwidth_bits_per_sec"
    )

    def _util(key: str, default: tuple[float, float]) -> UtilizationRange:
        pair = raw.get(key, list(default))
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ConfigError(key, "must be a [lower, upper] pair")
        try:
            return UtilizationRange(float(pair[0]), float(pair[1]))
        except InvariantViolation as exc:
            raise ConfigError(key, str(exc)) from None

    compute_util = _util("compute_utilization", (0.01, 1.0))
    bandwidth_util = _util("bandwidth_utilization", (0.005, 1.0))

    model_raw = _require(raw, "model")
    try:
        model = ModelSpec(
            flops_per_sample=_positive(_require(model_raw, "flops_per_sample"), "model.flops_per_sample"),
            model_bits=_positive(_require(model_raw, "model_bits"), "model.model_bits"),
        )
    except InvariantViolation as exc:
        raise ConfigError("model", str(exc)) from None

    sched_raw = _require(raw, "scheduler")
    variance_bound = sched_raw.get("variance_bound", 10000.0)
    try:
        constants = SchedulerConstants(
            variance_bound=float(variance_bound),
            idle_wait=float(sched_raw.get("idle_wait_sec", 1.0)),
            total_rounds=int(sched_raw.get("total_rounds", 500)),
            objective_time_offset=float(sched_raw.get("objective_time_offset_sec", 1.0)),
        )
    except InvariantViolation as exc:
        raise ConfigError("scheduler", str(exc)) from None

    strategy_raw = raw.get("strategy", "load-aware")
    try:
        strategy = Strategy(strategy_raw)
    except ValueError:
        valid = ", ".join(s.value for s in Strategy)
        raise ConfigError("strategy", f"unknown strategy {strategy_raw!r} (expected one of {valid})") from None

    learner_raw = raw.get("learner", {"kind": "logistic"})
    learner_kind = learner_raw.get("kind", "logistic")
    if learner_kind not in ("logistic", "surrogate"):
        raise ConfigError("learner.kind", f"unknown learner {learner_kind!r}")
    try:
        trainer = TrainerConfig(
            learning_rate=float(learner_raw.get("learning_rate", 0.001)),
            momentum=float(learner_raw.get("momentum", 0.9)),
            batch_size=int(learner_raw.get("batch_size", 32)),
            epochs_per_round=int(learner_raw.get("epochs_per_round", 1)),
        )
    except InvariantViolation as exc:
        raise ConfigError("learner", str(exc)) from None
    learner = LearnerConfig(
        kind=learner_kind,
        trainer=trainer,
        surrogate_ceiling=float(learner_raw.get("surrogate_ceiling", 0.95)),
        surrogate_halfway=float(learner_raw.get("surrogate_halfway", 500.0)),
    )

    ds_raw = raw.get("dataset", {"kind": "blobs"})
    ds_kind = ds_raw.get("kind", "blobs")
    if ds_kind not in ("blobs", "idx", "counts-only"):
        raise ConfigError("dataset.kind", f"unknown dataset kind {ds_kind!r}")
    if ds_kind == "idx" and ("images" not in ds_raw or "labels" not in ds_raw):
        raise ConfigError("dataset", "idx datasets need `images` and `labels` paths")
    if ds_kind == "counts-only" and learner_kind == "logistic":
        raise ConfigError("dataset.kind", "counts-only datasets require the surrogate learner")
    dataset = DatasetConfig(
        kind=ds_kind,
        dim=int(ds_raw.get("dim", 16)),
        separation=float(ds_raw.get("separation", 4.0)),
        test_per_class=int(ds_raw.get("test_per_class", 200)),
        images=ds_raw.get("images"),
        labels=ds_raw.get("labels"),
        test_images=ds_raw.get("test_images"),
        test_labels=ds_raw.get("test_labels"),
        shared_labels=bool(ds_raw.get("shared_labels", False)),
    )
    if dataset.kind == "blobs" and dataset.dim < 1:
        raise ConfigError("dataset.dim", "must be a positive integer")
    if dataset.kind == "blobs" and dataset.separation < 0:
        raise ConfigError("dataset.separation", "must be nonnegative")
    if dataset.kind == "blobs" and dataset.test_per_class < 1:
        raise ConfigError("dataset.test_per_class", "must be at least 1")

    thresholds = raw.get("accuracy_thresholds", [0.7, 0.9])
    if not isinstance(thresholds, (list, tuple)) or not thresholds:
        raise ConfigError("accuracy_thresholds", "must be a nonempty list")
    for t in thresholds:
        if not 0.0 <= float(t) <= 1.0:
            raise ConfigError("accuracy_thresholds", f"threshold {t} outside [0, 1]")

    config = ScenarioConfig(
        name=str(raw.get("name", name)),
        seed=int(raw.get("seed", 0)),
        label_table=table,
        baseline_compute_flops=compute,
        baseline_bandwidth_bits_per_sec=bandwidth,
        compute_utilization=compute_util,
        bandwidth_utilization=bandwidth_util,
        model=model,
        constants=constants,
        strategy=strategy,
        learner=learner,
        dataset=dataset,
        accuracy_thresholds=tuple(sorted(float(t) for t in thresholds)),
    )
    # Cross-checks shared with the in-memory constructors.
    validate_label_coverage(config.profiles())
    return config


# --------------------------------------------------------------------------
# Preset label tables. Even scenarios: each node holds 3 or 4 classes and
# each label is split evenly across its holders. Uneven: class counts per
# node vary (6/5/4/2/2), so nodes with more labels hold more data.
# --------------------------------------------------------------------------


def _split_counts(holders_per_label: list[list[int]], totals: list[int], n_nodes: int) -> list[list[int]]:
    table = [[0] * len(totals) for _ in range(n_nodes)]
    for label, holders in enumerate(holders_per_label):
        share, remainder = divmod(totals[label], len(holders))
        for pos, node in enumerate(holders):
            table[node][label] = share + (1 if pos < remainder else 0)
    return table


def _even_holders(n_nodes: int, n_labels: int, span: int) -> list[list[int]]:
    """Node i holds `span` consecutive labels starting at a stride; inverted
    to a per-label holder list."""
    stride = max(1, n_labels // n_nodes)
    holders: list[list[int]] = [[] for _ in range(n_labels)]
    for i in range(n_nodes):
        for offset in range(span):
            holders[(stride * i + offset) % n_labels].append(i)
    return holders


UNEVEN_5_CLASSES = [
    [0, 1, 2, 3, 4, 5],
    [4, 5, 6, 7, 8],
    [6, 7, 8, 9],
    [9, 0],
    [1, 2],
]


def _uneven_holders(n_labels: int) -> list[list[int]]:
    holders: list[list[int]] = [[] for _ in range(n_labels)]
    for node, classes in enumerate(UNEVEN_5_CLASSES):
        for c in classes:
            holders[c].append(node)
    return holders


def _mnist_base(name: str, table: list[list[int]]) -> dict:
    return {
        "name": name,
        "seed": 0,
        "label_table": table,
        "baseline_compute_flops": 10.0e12,
        "baseline_bandwidth_bits_per_sec": 200.0e6,
        "compute_utilization": [0.01, 1.0],
        "bandwidth_utilization": [0.005, 1.0],
        "model": dict(CNN_MODEL),
        "scheduler": {"variance_bound": 10000.0, "idle_wait_sec": 1.0, "total_rounds": 500},
        "strategy": "load-aware",
        "learner": {"kind": "logistic"},
        "dataset": {
            "kind": "idx",
            "images": "train-images-idx3-ubyte",
            "labels": "train-labels-idx1-ubyte",
            "test_images": "t10k-images-idx3-ubyte",
            "test_labels": "t10k-labels-idx1-ubyte",
        },
        "accuracy_thresholds": [0.7, 0.9],
    }


def _cifar_base(name: str, table: list[list[int]]) -> dict:
    return {
        "name": name,
        "seed": 0,
        "label_table": table,
        "baseline_compute_flops": 10.0e12,
        "baseline_bandwidth_bits_per_sec": 200.0e6,
        "compute_utilization": [0.01, 1.0],
        "bandwidth_utilization": [0.005, 1.0],
        "model": dict(RESNET18_MODEL),
        "scheduler": {"variance_bound": 10000.0, "idle_wait_sec": 1.0, "total_rounds": 500},
        "strategy": "load-aware",
        "learner": {"kind": "surrogate", "surrogate_ceiling": 0.95, "surrogate_halfway": 500.0},
        "dataset": {"kind": "counts-only"},
        "accuracy_thresholds": [0.6, 0.8],
    }


def _blob_base(name: str, table: list[list[int]], rounds: int) -> dict:
    return {
        "name": name,
        "seed": 1,
        "label_table": table,
        "baseline_compute_flops": 10.0e12,
        "baseline_bandwidth_bits_per_sec": 200.0e6,
        "compute_utilization": [0.01, 1.0],
        "bandwidth_utilization": [0.005, 1.0],
        "model": dict(CNN_MODEL),
        "scheduler": {"variance_bound": 10000.0, "idle_wait_sec": 1.0, "total_rounds": rounds},
        "strategy": "load-aware",
        "learner": {"kind": "logistic"},
        "dataset": {"kind": "blobs", "dim": 16, "separation": 4.0, "test_per_class": 200},
        "accuracy_thresholds": [0.7],
    }


def _preset_raw(name: str) -> dict:
    n_labels = 10
    if name == "mnist-3":
        holders = [[0]] * 4 + [[1]] * 3 + [[2]] * 3
        holders = [[0], [0], [0], [0], [1], [1], [1], [2], [2], [2]]
        return _mnist_base(name, _split_counts(holders, MNIST_TRAIN_COUNTS, 3))
    if name == "mnist-5":
        return _mnist_base(
            name, _split_counts(_even_holders(5, n_labels, 4), MNIST_TRAIN_COUNTS, 5)
        )
    if name == "mnist-10":
        return _mnist_base(
            name, _split_counts(_even_holders(10, n_labels, 3), MNIST_TRAIN_COUNTS, 10)
        )
    if name == "mnist-5-uneven":
        return _mnist_base(name, _split_counts(_uneven_holders(n_labels), MNIST_TRAIN_COUNTS, 5))
    if name == "cifar-3":
        holders = [[0], [0], [0], [0], [1], [1], [1], [2], [2], [2]]
        return _cifar_base(name, _split_counts(holders, CIFAR_TRAIN_COUNTS, 3))
    if name == "cifar-5":
        return _cifar_base(
            name, _split_counts(_even_holders(5, n_labels, 4), CIFAR_TRAIN_COUNTS, 5)
        )
    if name == "cifar-10":
        return _cifar_base(
            name, _split_counts(_even_holders(10, n_labels, 3), CIFAR_TRAIN_COUNTS, 10)
        )
    if name == "cifar-5-uneven":
        return _cifar_base(name, _split_counts(_uneven_holders(n_labels), CIFAR_TRAIN_COUNTS, 5))
    if name == "blobs-5-even":
        totals = [800] * n_labels
        return _blob_base(name, _split_counts(_even_holders(5, n_labels, 4), totals, 5), 300)
    if name == "blobs-5-uneven":
        holders = _uneven_holders(n_labels)
        totals = [400 * len(h) for h in holders]
        return _blob_base(name, _split_counts(holders, totals, 5), 300)
    raise KeyError(name)


PRESET_NAMES = (
    "mnist-3",
    "mnist-5",
    "mnist-10",
    "mnist-5-uneven",
    "cifar-3",
    "cifar-5",
    "cifar-10",
    "cifar-5-uneven",
    "blobs-5-even",
    "blobs-5-uneven",
)


def preset(name: str) -> ScenarioConfig:
    try:
        raw = _preset_raw(name)
    except KeyError:
        raise ConfigError("preset", f"unknown preset {name!r} (known: {', '.join(PRESET_NAMES)})") from None
    return parse_config(raw, name=name)


def load_config(source: str | Path) -> ScenarioConfig:
    """Load a scenario from a preset name or a YAML file path."""
    if isinstance(source, str) and source in PRESET_NAMES:
        return preset(source)
    path = Path(source)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        raw = yaml.safe_load(handle)
    return parse_config(raw, name=path.stem)


def dump_config(config: ScenarioConfig) -> str:
    return yaml.safe_dump(config.normalized(), sort_keys=True, default_flow_style=None)
