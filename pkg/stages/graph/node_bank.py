"""
Task and class nodes: running means of instance embeddings, updated by a
moving average every training iteration
"""
from dataclasses import dataclass
from typing import Sequence

import torch

from orchestrator.types import DatasetManifest, LabeledRecord, Split
from stages.datagen.synth_generator import records_to_arrays
from stages.model.networks import embed
from stages.model.param_store import DTYPE, ParamStore


@dataclass
class NodeBank:
    task_nodes: torch.Tensor      # T x d
    class_nodes: torch.Tensor     # C x d
    task_seen: torch.Tensor       # bool, T
    class_seen: torch.Tensor      # bool, C
    decay: float = 0.9

    @classmethod
    def empty(cls, num_tasks: int, num_classes: int, dim: int, decay: float = 0.9) -> "NodeBank":
        return cls(
            torch.zeros((num_tasks, dim), dtype=DTYPE),
            torch.zeros((num_classes, dim), dtype=DTYPE),
            torch.zeros(num_tasks, dtype=torch.bool),
            torch.zeros(num_classes, dtype=torch.bool),
            decay,
        )

    @classmethod
    def from_nodes(cls, task_nodes, class_nodes, decay: float = 0.9) -> "NodeBank":
        task_nodes = torch.as_tensor(task_nodes, dtype=DTYPE)
        class_nodes = torch.as_tensor(class_nodes, dtype=DTYPE)
        return cls(
            task_nodes,
            class_nodes,
            torch.ones(task_nodes.shape[0], dtype=torch.bool),
            torch.ones(class_nodes.shape[0], dtype=torch.bool),
            decay,
        )

    @property
    def num_tasks(self) -> int:
        return int(self.task_nodes.shape[0])

    @property
    def num_classes(self) -> int:
        return int(self.class_nodes.shape[0])

    @property
    def dim(self) -> int:
        return int(self.task_nodes.shape[1])

    def detached(self) -> "NodeBank":
        return NodeBank(
            self.task_nodes.detach(), self.class_nodes.detach(),
            self.task_seen.clone(), self.class_seen.clone(), self.decay,
        )


def _moving_average(
    old: torch.Tensor, seen: torch.Tensor, embeddings: torch.Tensor, groups: torch.Tensor, decay: float
):
    count = old.shape[0]
    one_hot = torch.nn.functional.one_hot(groups, num_classes=count).to(embeddings.dtype)
    counts = one_hot.sum(dim=0)
    means = (one_hot.T @ embeddings) / counts.clamp(min=1.0).unsqueeze(1)

    present = counts > 0
    history = old.detach()
    blended = history + (1.0 - decay) * (means - history)
    # a node seen for the first time starts at its batch mean
    updated = torch.where((present & seen).unsqueeze(1), blended, means)
    updated = torch.where(present.unsqueeze(1), updated, history)
    return updated, seen | present


def update_node_bank(
    bank: NodeBank, embeddings: torch.Tensor, task_ids: torch.Tensor, class_ids: torch.Tensor
) -> NodeBank:
    """
    v <- decay * v + (1 - decay) * batch mean, for every task and class in
    the batch. The history term is a constant; the batch mean carries
    gradients back into the extractor.
    """
    task_nodes, task_seen = _moving_average(
        bank.task_nodes, bank.task_seen, embeddings, task_ids.to(torch.long), bank.decay
    )
    class_nodes, class_seen = _moving_average(
        bank.class_nodes, bank.class_seen, embeddings, class_ids.to(torch.long), bank.decay
    )
    return NodeBank(task_nodes, class_nodes, task_seen, class_seen, bank.decay)


def recompute_node_bank(
    params: ParamStore,
    manifest: DatasetManifest,
    records: Sequence[LabeledRecord],
    dim: int,
    decay: float = 0.9,
) -> NodeBank:
    """Exact task and class means over every training record"""
    train = [r for r in records if r.split is Split.TRAIN]
    bank = NodeBank.empty(manifest.num_tasks, manifest.num_classes, dim, decay)
    if not train:
        return bank
    arrays = records_to_arrays(train, manifest.input_dim)
    task_ids = torch.from_numpy(arrays["task_ids"])
    class_ids = torch.from_numpy(arrays["class_ids"])
    with torch.no_grad():
        embeddings = embed(params, torch.from_numpy(arrays["features"]), task_ids)
        # decay 0 turns the moving average into the plain mean
        full = NodeBank.empty(manifest.num_tasks, manifest.num_classes, dim, 0.0)
        full = update_node_bank(full, embeddings, task_ids, class_ids)
    return NodeBank(full.task_nodes, full.class_nodes, full.task_seen, full.class_seen, decay)
