"""
Cross-entropy, assignment entropy and the joint objective
    total = mean_t CE_t - beta * mean_c H(k_c)
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from orchestrator.errors import ContractViolationError, NumericalError
from orchestrator.types import Batch, DatasetManifest, LossBreakdown, Method, TrainConfig
from stages.graph.association_graph import GraphSettings, class_task_edges
from stages.graph.node_bank import NodeBank, update_node_bank
from stages.message_passing.gnn_layers import enhance_instances
from stages.model.networks import classify, embed
from stages.model.param_store import ParamStore

LOG_FLOOR = 1e-30
SIMPLEX_TOLERANCE = 1e-6


def cross_entropy(logits: torch.Tensor, label) -> torch.Tensor:
    """-log softmax(logits)[label]; works on one row or a B x C batch with B labels"""
    if logits.dim() == 1:
        return -torch.log_softmax(logits, dim=0)[int(label)]
    labels = torch.as_tensor(label, dtype=torch.long).reshape(-1)
    picked = torch.log_softmax(logits, dim=1).gather(1, labels.unsqueeze(1)).squeeze(1)
    return -picked


def assignment_entropy(row: torch.Tensor) -> torch.Tensor:
    """-sum_t p_t log p_t over a simplex row (or each row of a matrix); 0 log 0 := 0"""
    total = row.detach().sum(dim=-1)
    if bool((torch.abs(total - 1.0) > SIMPLEX_TOLERANCE).any()):
        raise ContractViolationError(f"assignment row sums to {total.tolist()}, expected 1")
    return -(row * torch.log(row.clamp(min=LOG_FLOOR))).sum(dim=-1)


def _per_task_mean(losses: torch.Tensor, task_ids: torch.Tensor) -> torch.Tensor:
    """Mean within each task present, then mean across those tasks"""
    present = torch.unique(task_ids)
    return torch.stack([losses[task_ids == t].mean() for t in present.tolist()]).mean()


@dataclass
class ObjectiveOutput:
    total: torch.Tensor
    breakdown: LossBreakdown
    bank: NodeBank
    logits: torch.Tensor


def _check_observed(batch: Batch, manifest: DatasetManifest) -> None:
    for t, c in zip(batch.task_ids.tolist(), batch.class_ids.tolist()):
        if not manifest.is_observed(t, c):
            raise ContractViolationError(f"class {c} is missing for task {t} and cannot be a training label")


def forward_objective(
    params: ParamStore,
    bank: NodeBank,
    batch: Batch,
    config: TrainConfig,
    manifest: Optional[DatasetManifest] = None,
) -> ObjectiveOutput:
    """
    One training forward pass: embed, update the node bank, build and
    propagate the graph, classify, and combine the two losses.
    """
    if batch.size < 1:
        raise ContractViolationError("objective needs a non-empty batch")
    if manifest is not None:
        _check_observed(batch, manifest)

    settings = GraphSettings.from_config(config)
    method = params.method
    embeddings = embed(params, batch.features, batch.task_ids)
    if method is Method.GRAPH:
        updated = update_node_bank(bank, embeddings, batch.task_ids, batch.class_ids)
        enhanced = enhance_instances(params, updated, embeddings, batch.task_ids, settings)
    else:
        # baselines keep no node bank
        updated, enhanced = bank, embeddings
    logits = classify(params, batch.task_ids, enhanced)
    losses = cross_entropy(logits, batch.class_ids)
    ce = losses.mean() if method is Method.ERM else _per_task_mean(losses, batch.task_ids)

    uses_entropy = (
        method is Method.GRAPH and config.beta > 0
        and settings.use_task_graph and settings.use_class_graph
    )
    if uses_entropy:
        ae = assignment_entropy(class_task_edges(updated.class_nodes, updated.task_nodes, settings.alpha_pair)).mean()
        total = ce - config.beta * ae
    elif method is Method.GRAPH:
        with torch.no_grad():
            ae = assignment_entropy(
                class_task_edges(updated.class_nodes, updated.task_nodes, settings.alpha_pair)
            ).mean()
        total = ce
    else:
        ae = torch.zeros((), dtype=ce.dtype)
        total = ce

    breakdown = LossBreakdown(
        ce=float(ce.detach()),
        ae=float(ae.detach()),
        total=float(total.detach()),
        average_assignment_entropy=float(ae.detach()),
    )
    return ObjectiveOutput(total=total, breakdown=breakdown, bank=updated, logits=logits)


def total_loss(
    params: ParamStore,
    bank: NodeBank,
    batch: Batch,
    config: TrainConfig,
    manifest: Optional[DatasetManifest] = None,
) -> LossBreakdown:
    with torch.no_grad():
        return forward_objective(params, bank, batch, config, manifest).breakdown


def gradient(
    params: ParamStore,
    bank: NodeBank,
    batch: Batch,
    config: TrainConfig,
    manifest: Optional[DatasetManifest] = None,
) -> np.ndarray:
    """d total / d params, flattened in ParamStore enumeration order"""
    params.requires_grad_(True)
    output = forward_objective(params, bank, batch, config, manifest)
    grads = torch.autograd.grad(output.total, params.tensors(), allow_unused=True)

    chunks = []
    for name, tensor, grad in zip(params.names(), params.tensors(), grads):
        if grad is None:
            grad = torch.zeros_like(tensor)
        if not bool(torch.isfinite(grad).all()):
            raise NumericalError("non-finite gradient", name)
        chunks.append(grad.detach().reshape(-1).numpy())
    return np.concatenate(chunks) if chunks else np.zeros(0)
