"""
Central finite-difference check of the analytic gradient
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import torch

from orchestrator.types import Batch, DatasetManifest, GradCheckReport, TrainConfig
from stages.graph.node_bank import NodeBank
from stages.model.param_store import DTYPE, ParamStore, init_params

from .losses import gradient, total_loss

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4


def finite_difference_gradient(
    fn: Callable[[ParamStore], float], params: ParamStore, step: float = DEFAULT_STEP
) -> np.ndarray:
    """(f(p + h e_i) - f(p - h e_i)) / 2h for every flat index i; params are restored"""
    shifted = params.clone()
    grad = np.zeros(shifted.num_scalars)
    for i in range(shifted.num_scalars):
        original = shifted.get_scalar(i)
        shifted.set_scalar(i, original + step)
        upper = fn(shifted)
        shifted.set_scalar(i, original - step)
        lower = fn(shifted)
        shifted.set_scalar(i, original)
        grad[i] = (upper - lower) / (2.0 * step)
    return grad


def check_gradients(
    params: ParamStore,
    bank: NodeBank,
    batch: Batch,
    config: TrainConfig,
    manifest: Optional[DatasetManifest] = None,
    step: float = DEFAULT_STEP,
    tolerance: float = DEFAULT_TOLERANCE,
) -> GradCheckReport:
    """Largest |analytic - fd| / max(1, |fd|) over all scalars"""
    analytic = gradient(params.clone(), bank, batch, config, manifest)
    numeric = finite_difference_gradient(
        lambda p: total_loss(p, bank, batch, config, manifest).total, params, step
    )
    errors = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))
    worst = int(np.argmax(errors)) if errors.size else 0
    worst_error = float(errors[worst]) if errors.size else 0.0
    worst_name = params.scalar_names()[worst] if errors.size else ""

    report = GradCheckReport(
        max_relative_error=worst_error,
        worst_index=worst,
        worst_parameter=worst_name,
        num_parameters=params.num_scalars,
        tolerance=tolerance,
        passed=worst_error < tolerance,
    )
    logger.info(f"gradcheck over {report.num_parameters} scalars: max rel. error {worst_error:.3e} at {worst_name}")
    return report


@dataclass
class GradCheckProblem:
    params: ParamStore
    bank: NodeBank
    batch: Batch
    config: TrainConfig
    manifest: DatasetManifest


def toy_problem(
    config: TrainConfig, num_tasks: int = 2, num_classes: int = 3, input_dim: int = 3, seed: int = 0
) -> GradCheckProblem:
    """
    Random parameters, a node bank that has already seen every node, and a
    batch of `batch_size` instances per task with labels observed everywhere.
    """
    rng = np.random.default_rng(seed)
    d = config.embed_dim
    params = init_params(config, input_dim, num_tasks, num_classes, seed=seed)
    bank = NodeBank.from_nodes(
        rng.normal(size=(num_tasks, d)), rng.normal(size=(num_classes, d)), config.node_decay
    )

    B = config.batch_size * num_tasks
    task_ids = np.repeat(np.arange(num_tasks), config.batch_size)
    class_ids = rng.integers(0, num_classes, size=B)
    batch = Batch(
        features=torch.as_tensor(rng.normal(size=(B, input_dim)), dtype=DTYPE),
        task_ids=torch.as_tensor(task_ids, dtype=torch.long),
        class_ids=torch.as_tensor(class_ids, dtype=torch.long),
    )
    manifest = DatasetManifest(
        num_tasks=num_tasks,
        num_classes=num_classes,
        input_dim=input_dim,
        class_names=tuple(f"class{c}" for c in range(num_classes)),
        observed_classes=tuple(tuple(range(num_classes)) for _ in range(num_tasks)),
    )
    return GradCheckProblem(params, bank, batch, config, manifest)
