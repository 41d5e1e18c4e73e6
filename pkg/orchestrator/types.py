from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd
import torch

from .errors import ConfigurationError


class Split(Enum):
    TRAIN = "train"
    TEST = "test"


class RunStatus(Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


class Method(Enum):
    GRAPH = "graph"
    ERM = "erm"
    STL = "stl"


# ---------------------------------------------------------------------- #
# Data
# ---------------------------------------------------------------------- #
@dataclass(frozen=True)
class LabeledRecord:
    """One feature vector of one task, labelled over the entire label space"""
    task_id: int
    class_id: int
    split: Split
    features: Tuple[float, ...]


@dataclass(frozen=True)
class DatasetManifest:
    """Header of a multi-task corpus: sizes, class names and the observed classes per task"""
    num_tasks: int
    num_classes: int
    input_dim: int
    class_names: Tuple[str, ...]
    observed_classes: Tuple[Tuple[int, ...], ...]

    def is_observed(self, task_id: int, class_id: int) -> bool:
        return class_id in self.observed_classes[task_id]

    def with_observed(self, observed: Sequence[Sequence[int]]) -> "DatasetManifest":
        return DatasetManifest(
            num_tasks=self.num_tasks,
            num_classes=self.num_classes,
            input_dim=self.input_dim,
            class_names=self.class_names,
            observed_classes=tuple(tuple(sorted(set(int(c) for c in s))) for s in observed),
        )


def _from_dict(cls, values: Optional[Dict[str, Any]], aliases: Dict[str, str]):
    values = dict(values or {})
    known = {f.name for f in fields(cls)}
    resolved: Dict[str, Any] = {}
    for key, value in values.items():
        name = aliases.get(key, key)
        if name not in known:
            raise ConfigurationError(f"Unknown {cls.__name__} key: '{key}'")
        resolved[name] = value
    try:
        config = cls(**resolved)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc
    config.validate()
    return config


@dataclass
class SynthConfig:
    """Class-conditional Gaussians pushed through a random affine map per task"""
    num_tasks: int = 4
    num_classes: int = 8
    input_dim: int = 16
    class_separation: float = 3.0
    task_shift: float = 0.5
    train_per_class: int = 30
    test_per_class: int = 20
    seed: int = 0

    ALIASES = {"T": "num_tasks", "C": "num_classes", "d_in": "input_dim"}

    @classmethod
    def from_dict(cls, values: Optional[Dict[str, Any]]) -> "SynthConfig":
        return _from_dict(cls, values, cls.ALIASES)

    def validate(self) -> None:
        for name in ("num_tasks", "num_classes", "input_dim", "train_per_class", "test_per_class"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                raise ConfigurationError(f"SynthConfig.{name} must be a positive integer, got {value!r}")
        for name in ("class_separation", "task_shift"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigurationError(f"SynthConfig.{name} must be finite, got {value!r}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class TrainConfig:
    """Hyper-parameters of association-graph training and of the baselines"""
    embed_dim: int = 16
    hidden_widths: Optional[List[int]] = None
    num_layers: int = 4
    neighbor_size: Optional[int] = None          # None = full graph
    beta: float = 0.1
    alpha_task: Optional[float] = None           # None = sqrt(embed_dim)
    alpha_class: Optional[float] = None
    alpha_pair: Optional[float] = None
    learning_rate: float = 0.05
    batch_size: int = 16
    iterations: int = 2000
    seed: int = 0
    optimizer: str = "sgd"
    momentum: float = 0.9
    node_decay: float = 0.9
    init_scale: float = 1.0
    method: str = "graph"
    use_task_graph: bool = True
    use_class_graph: bool = True
    refresh_nodes_before_eval: bool = False

    ALIASES = {
        "d": "embed_dim",
        "L": "num_layers",
        "k": "neighbor_size",
        "lr": "learning_rate",
        "alpha_T": "alpha_task",
        "alpha_C": "alpha_class",
        "alpha_P": "alpha_pair",
    }

    @classmethod
    def from_dict(cls, values: Optional[Dict[str, Any]]) -> "TrainConfig":
        values = dict(values or {})
        for key in ("neighbor_size", "k"):
            if isinstance(values.get(key), str) and values[key].lower() in ("full", "max", "none"):
                values[key] = None
        return _from_dict(cls, values, cls.ALIASES)

    def validate(self) -> None:
        if self.embed_dim < 1:
            raise ConfigurationError("embed_dim must be >= 1")
        if self.num_layers < 0:
            raise ConfigurationError("num_layers (L) must be >= 0")
        if self.neighbor_size is not None and self.neighbor_size < 1:
            raise ConfigurationError("neighbor_size (k) must be >= 1")
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be >= 0")
        if self.beta < 0:
            raise ConfigurationError("beta must be >= 0")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        if self.optimizer not in ("sgd", "sgd_momentum"):
            raise ConfigurationError(f"Unknown optimizer '{self.optimizer}'")
        if not 0.0 <= self.node_decay < 1.0:
            raise ConfigurationError("node_decay must lie in [0, 1)")
        if self.init_scale < 0:
            raise ConfigurationError("init_scale must be >= 0")
        try:
            Method(self.method)
        except ValueError as exc:
            raise ConfigurationError(f"Unknown method '{self.method}'") from exc
        for name in ("alpha_task", "alpha_class", "alpha_pair"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigurationError(f"{name} must be strictly positive")
        if self.hidden_widths is not None and any(w < 1 for w in self.hidden_widths):
            raise ConfigurationError("hidden_widths must be positive")

    @property
    def model_method(self) -> Method:
        return Method(self.method)

    def resolved_alphas(self) -> Tuple[float, float, float]:
        default = math.sqrt(self.embed_dim)
        return (
            float(self.alpha_task or default),
            float(self.alpha_class or default),
            float(self.alpha_pair or default),
        )

    def extractor_widths(self) -> List[int]:
        if self.hidden_widths is None:
            return [self.embed_dim, self.embed_dim]
        return list(self.hidden_widths)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class SplitConfig:
    """
    How the training split is thinned: a random assignment at missing_rate,
    an explicit assignment file, or a published benchmark table at missing_rate
    """
    missing_rate: float = 0.5
    assignment: Optional[str] = None
    benchmark: Optional[str] = None
    seed: int = 0

    ALIASES = {"gamma": "missing_rate"}

    @classmethod
    def from_dict(cls, values: Optional[Dict[str, Any]]) -> "SplitConfig":
        return _from_dict(cls, values, cls.ALIASES)

    def validate(self) -> None:
        if not isinstance(self.missing_rate, (int, float)) or not 0.0 <= self.missing_rate < 1.0:
            raise ConfigurationError(f"missing_rate must lie in [0, 1), got {self.missing_rate!r}")
        if self.assignment and self.benchmark:
            raise ConfigurationError("give either an assignment file or a benchmark, not both")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ExtractorConfig:
    input_dim: int
    hidden_widths: Tuple[int, ...]
    output_dim: int

    @classmethod
    def from_train_config(cls, config: TrainConfig, input_dim: int) -> "ExtractorConfig":
        return cls(input_dim, tuple(config.extractor_widths()), config.embed_dim)

    def layer_shapes(self) -> List[Tuple[int, int]]:
        widths = [self.input_dim, *self.hidden_widths, self.output_dim]
        return [(widths[i + 1], widths[i]) for i in range(len(widths) - 1)]


# ---------------------------------------------------------------------- #
# Training / evaluation
# ---------------------------------------------------------------------- #
@dataclass
class Batch:
    """A mini-batch stacked across tasks; rows are instances"""
    features: torch.Tensor
    task_ids: torch.Tensor
    class_ids: torch.Tensor

    @property
    def size(self) -> int:
        return int(self.features.shape[0])


@dataclass
class LossBreakdown:
    ce: float
    ae: float
    total: float
    average_assignment_entropy: float


@dataclass
class TrainLogEntry:
    iteration: int
    ce: float
    ae: float
    total: float
    avg_entropy: float


@dataclass
class TaskMetrics:
    task_id: int
    missing_accuracy: Optional[float]
    observed_accuracy: Optional[float]
    harmonic_mean: Optional[float]
    num_missing: int
    num_observed: int


@dataclass
class MetricsReport:
    """Accuracy on missing vs. observed classes, per task and averaged"""
    per_task: List[TaskMetrics]
    missing_accuracy: Optional[float]
    observed_accuracy: Optional[float]
    harmonic_mean: Optional[float]
    gamma: float
    avg_assignment_entropy: Optional[float]
    overall_accuracy: float
    class_accuracy: pd.DataFrame = field(default_factory=pd.DataFrame)

    def summary_line(self) -> str:
        values = [self.gamma, self.missing_accuracy, self.observed_accuracy,
                  self.harmonic_mean, self.avg_assignment_entropy]
        return "\t".join("-" if v is None else f"{v:.6f}" for v in values)

    def to_document(self) -> Dict[str, Any]:
        return {
            "gamma": self.gamma,
            "A_m": self.missing_accuracy,
            "A_o": self.observed_accuracy,
            "H": self.harmonic_mean,
            "avg_assignment_entropy": self.avg_assignment_entropy,
            "overall_accuracy": self.overall_accuracy,
            "per_task": [
                {
                    "task": m.task_id,
                    "A_m": m.missing_accuracy,
                    "A_o": m.observed_accuracy,
                    "H": m.harmonic_mean,
                    "n_missing": m.num_missing,
                    "n_observed": m.num_observed,
                }
                for m in self.per_task
            ],
            "class_accuracy": self.class_accuracy,
        }


@dataclass
class GradCheckReport:
    max_relative_error: float
    worst_index: int
    worst_parameter: str
    num_parameters: int
    tolerance: float
    passed: bool


@dataclass
class RunResult:
    """Overall result of one CLI command"""
    status: RunStatus
    command: str
    outputs: Dict[str, str]
    execution_time: float
    errors: List[str]
    exit_code: int = 0
    messages: List[str] = field(default_factory=list)
