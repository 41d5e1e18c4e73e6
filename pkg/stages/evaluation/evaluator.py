"""
Test-time inference and the missing / observed accuracy protocol
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch
from sklearn.metrics import confusion_matrix

from orchestrator.errors import ShapeError
from orchestrator.types import DatasetManifest, LabeledRecord, Method, MetricsReport, Split, TaskMetrics, TrainConfig
from stages.datagen.category_shift import missing_rate
from stages.datagen.synth_generator import records_to_arrays
from stages.graph.association_graph import GraphSettings, class_task_edges
from stages.graph.node_bank import NodeBank, recompute_node_bank
from stages.message_passing.gnn_layers import enhance_instances
from stages.model.networks import as_tensor, classify, embed
from stages.model.param_store import ParamStore
from stages.objective.losses import assignment_entropy


def _enhanced_logits(
    params: ParamStore, bank: NodeBank, features: torch.Tensor, task_ids: torch.Tensor, config: TrainConfig
) -> torch.Tensor:
    embeddings = embed(params, features, task_ids)
    if params.method is Method.GRAPH:
        embeddings = enhance_instances(params, bank, embeddings, task_ids, GraphSettings.from_config(config))
    return classify(params, task_ids, embeddings)


def predict(
    params: ParamStore, bank: NodeBank, x, task_id: int, config: TrainConfig
) -> Tuple[int, np.ndarray]:
    """Class id and logits for one instance, from its own single-instance graph"""
    x = as_tensor(x)
    if x.dim() != 1:
        raise ShapeError(f"predict takes one feature vector, got shape {tuple(x.shape)}")
    if not 0 <= task_id < params.num_tasks:
        raise ShapeError(f"task id {task_id} outside [0, {params.num_tasks})")
    with torch.no_grad():
        logits = _enhanced_logits(
            params, bank, x.unsqueeze(0), torch.tensor([task_id], dtype=torch.long), config
        )[0]
    values = logits.numpy().copy()
    return int(np.argmax(values)), values


def predict_batch(
    params: ParamStore, bank: NodeBank, features, task_ids, config: TrainConfig
) -> Tuple[np.ndarray, np.ndarray]:
    """
    All instances in one graph. Instances only read task and class nodes
    and themselves, so each row matches `predict` on its own.
    """
    features = as_tensor(features)
    ids = torch.as_tensor(np.asarray(task_ids), dtype=torch.long).reshape(-1)
    if features.dim() != 2 or features.shape[0] != ids.numel():
        raise ShapeError(f"{ids.numel()} task ids for features of shape {tuple(features.shape)}")
    if features.shape[0] == 0:
        return np.zeros(0, dtype=np.int64), np.zeros((0, params.num_classes))
    with torch.no_grad():
        logits = _enhanced_logits(params, bank, features, ids, config).numpy().copy()
    return np.argmax(logits, axis=1), logits


def average_assignment_entropy(bank: NodeBank, config: TrainConfig) -> float:
    _, _, alpha_pair = config.resolved_alphas()
    with torch.no_grad():
        rows = class_task_edges(bank.class_nodes, bank.task_nodes, alpha_pair)
        return float(assignment_entropy(rows).mean())


def harmonic_mean(missing: Optional[float], observed: Optional[float]) -> Optional[float]:
    if missing is None or observed is None:
        return None
    if missing + observed == 0:
        return 0.0
    return 2.0 * missing * observed / (missing + observed)


def _percent(correct: np.ndarray) -> Optional[float]:
    return 100.0 * float(correct.mean()) if correct.size else None


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


class Evaluator:
    """Scores a trained model on the test split of a (shifted) dataset"""

    def __init__(self, config: TrainConfig):
        self.config = config
        self.logger = logging.getLogger(self.__class__.__name__)

    def evaluate(
        self,
        params: ParamStore,
        bank: NodeBank,
        manifest: DatasetManifest,
        records: Sequence[LabeledRecord],
    ) -> MetricsReport:
        if self.config.refresh_nodes_before_eval:
            bank = recompute_node_bank(params, manifest, records, bank.dim, bank.decay)
            self.logger.info("Task and class nodes recomputed over the full training split")
        diagnostic_bank = bank
        if params.method is not Method.GRAPH and not self.config.refresh_nodes_before_eval:
            # baselines keep no node bank; score their embeddings' class/task means instead
            diagnostic_bank = recompute_node_bank(params, manifest, records, bank.dim, bank.decay)

        test = [r for r in records if r.split is Split.TEST]
        arrays = records_to_arrays(test, manifest.input_dim)
        predictions, _ = predict_batch(params, bank, arrays["features"], arrays["task_ids"], self.config)
        task_ids, labels = arrays["task_ids"], arrays["class_ids"]
        correct = predictions == labels

        per_task: List[TaskMetrics] = []
        class_rows: List[Dict] = []
        for t in range(manifest.num_tasks):
            rows = task_ids == t
            observed = np.isin(labels, manifest.observed_classes[t])
            missing_bucket = correct[rows & ~observed]
            observed_bucket = correct[rows & observed]
            a_m, a_o = _percent(missing_bucket), _percent(observed_bucket)
            per_task.append(TaskMetrics(
                task_id=t,
                missing_accuracy=a_m,
                observed_accuracy=a_o,
                harmonic_mean=harmonic_mean(a_m, a_o),
                num_missing=int(missing_bucket.size),
                num_observed=int(observed_bucket.size),
            ))
            class_rows.extend(self._class_table(t, labels[rows], predictions[rows], manifest))

        a_m = _mean([m.missing_accuracy for m in per_task])
        a_o = _mean([m.observed_accuracy for m in per_task])
        report = MetricsReport(
            per_task=per_task,
            missing_accuracy=a_m,
            observed_accuracy=a_o,
            harmonic_mean=harmonic_mean(a_m, a_o),
            gamma=missing_rate(manifest),
            avg_assignment_entropy=average_assignment_entropy(diagnostic_bank, self.config),
            overall_accuracy=_percent(correct) or 0.0,
            class_accuracy=pd.DataFrame(
                class_rows,
                columns=["task", "class", "class_name", "observed", "support", "correct", "accuracy"],
            ),
        )
        self.logger.info(f"📊 Evaluated {len(test)} test records: {report.summary_line()}")
        return report

    def _class_table(
        self, task_id: int, labels: np.ndarray, predictions: np.ndarray, manifest: DatasetManifest
    ) -> List[Dict]:
        if labels.size == 0:
            return []
        matrix = confusion_matrix(labels, predictions, labels=list(range(manifest.num_classes)))
        support = matrix.sum(axis=1)
        rows = []
        for c in np.flatnonzero(support):
            rows.append({
                "task": task_id,
                "class": int(c),
                "class_name": manifest.class_names[c],
                "observed": manifest.is_observed(task_id, int(c)),
                "support": int(support[c]),
                "correct": int(matrix[c, c]),
                "accuracy": 100.0 * matrix[c, c] / support[c],
            })
        return rows


def evaluate(
    params: ParamStore,
    bank: NodeBank,
    manifest: DatasetManifest,
    records: Sequence[LabeledRecord],
    config: Optional[TrainConfig] = None,
) -> MetricsReport:
    return Evaluator(config or TrainConfig()).evaluate(params, bank, manifest, records)
