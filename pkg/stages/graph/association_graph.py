"""
Association graph over task, class and instance nodes.

Node order is [tasks; classes; instances]. Task-task and class-class edges
come from learnable metric heads, class-task edges from a normalized
Gaussian kernel, instance edges from a scaled dot-product softmax.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from orchestrator.errors import ConfigurationError, ShapeError
from orchestrator.types import TrainConfig
from stages.model.param_store import ParamStore

from .node_bank import NodeBank


@dataclass(frozen=True)
class GraphSettings:
    alpha_task: float
    alpha_class: float
    alpha_pair: float
    use_task_graph: bool = True
    use_class_graph: bool = True
    neighbor_size: Optional[int] = None

    @classmethod
    def from_config(cls, config: TrainConfig) -> "GraphSettings":
        alpha_task, alpha_class, alpha_pair = config.resolved_alphas()
        return cls(
            alpha_task, alpha_class, alpha_pair,
            config.use_task_graph, config.use_class_graph, config.neighbor_size,
        )


@dataclass
class AssociationGraph:
    node_features: torch.Tensor          # N x d, N = T' + C' + B
    adjacency: torch.Tensor              # N x N, symmetric
    read_mask: torch.Tensor              # N x N bool, row i may read column j
    num_task_nodes: int
    num_class_nodes: int
    instance_task_ids: torch.Tensor
    class_task: Optional[torch.Tensor] = None   # C x T, rows on the simplex

    @property
    def num_nodes(self) -> int:
        return int(self.node_features.shape[0])

    @property
    def instance_offset(self) -> int:
        return self.num_task_nodes + self.num_class_nodes


# ---------------------------------------------------------------------- #
# Edge families
# ---------------------------------------------------------------------- #
def _metric_edge(weight: torch.Tensor, bias: torch.Tensor, a: torch.Tensor, b: torch.Tensor, alpha: float):
    return torch.sigmoid((torch.abs(a - b) / alpha) @ weight + bias.reshape(()))


def task_edge(params: ParamStore, v_i: torch.Tensor, v_j: torch.Tensor, alpha: float) -> torch.Tensor:
    """sigma(W_T (|v_i - v_j| / alpha) + b_T)"""
    return _metric_edge(params["edge.W_T"], params["edge.b_T"], v_i, v_j, alpha)


def class_edge(params: ParamStore, k_i: torch.Tensor, k_j: torch.Tensor, alpha: float) -> torch.Tensor:
    return _metric_edge(params["edge.W_C"], params["edge.b_C"], k_i, k_j, alpha)


def _metric_adjacency(weight, bias, nodes: torch.Tensor, alpha: float) -> torch.Tensor:
    diff = torch.abs(nodes.unsqueeze(1) - nodes.unsqueeze(0)) / alpha
    return torch.sigmoid(diff @ weight + bias.reshape(()))


def task_adjacency(params: ParamStore, task_nodes: torch.Tensor, alpha: float) -> torch.Tensor:
    return _metric_adjacency(params["edge.W_T"], params["edge.b_T"], task_nodes, alpha)


def class_adjacency(params: ParamStore, class_nodes: torch.Tensor, alpha: float) -> torch.Tensor:
    return _metric_adjacency(params["edge.W_C"], params["edge.b_C"], class_nodes, alpha)


def class_task_edges(class_nodes: torch.Tensor, task_nodes: torch.Tensor, alpha: float) -> torch.Tensor:
    """Gaussian kernel between every class and task node, normalized over tasks"""
    if task_nodes.shape[0] < 1:
        raise ShapeError("class-task edges need at least one task node")
    scaled = (class_nodes.unsqueeze(1) - task_nodes.unsqueeze(0)) / alpha
    logits = -0.5 * (scaled ** 2).sum(dim=-1)
    return torch.softmax(logits, dim=1)


def instance_edges(instances: torch.Tensor, nodes: torch.Tensor, dim: Optional[int] = None) -> torch.Tensor:
    """softmax over nodes of <E(x), v> / sqrt(d); one simplex row per instance"""
    dim = dim or int(nodes.shape[-1])
    if instances.shape[-1] != nodes.shape[-1]:
        raise ShapeError(f"instance width {instances.shape[-1]} != node width {nodes.shape[-1]}")
    return torch.softmax(instances @ nodes.T / math.sqrt(dim), dim=-1)


# ---------------------------------------------------------------------- #
# Assembly
# ---------------------------------------------------------------------- #
def assemble(
    bank: NodeBank,
    params: ParamStore,
    embeddings: torch.Tensor,
    task_ids: torch.Tensor,
    settings: GraphSettings,
) -> AssociationGraph:
    """Block adjacency [[A_T, A_CT^T, A_XT^T], [A_CT, A_C, A_XC^T], [A_XT, A_XC, I]]"""
    if embeddings.dim() != 2 or embeddings.shape[0] < 1:
        raise ShapeError("assemble needs a non-empty B x d matrix of instance embeddings")
    if embeddings.shape[1] != bank.dim:
        raise ShapeError(f"instance width {embeddings.shape[1]} != node width {bank.dim}")

    d = bank.dim
    B = embeddings.shape[0]
    dtype = embeddings.dtype
    V_T, V_C = bank.task_nodes, bank.class_nodes

    use_t, use_c = settings.use_task_graph, settings.use_class_graph
    T = bank.num_tasks if use_t else 0
    C = bank.num_classes if use_c else 0

    class_task = class_task_edges(V_C, V_T, settings.alpha_pair) if (use_t and use_c) else None

    rows = []
    if use_t:
        blocks = [task_adjacency(params, V_T, settings.alpha_task)]
        if use_c:
            blocks.append(class_task.T)
        blocks.append(instance_edges(embeddings, V_T, d).T)
        rows.append(torch.cat(blocks, dim=1))
    if use_c:
        blocks = []
        if use_t:
            blocks.append(class_task)
        blocks.append(class_adjacency(params, V_C, settings.alpha_class))
        blocks.append(instance_edges(embeddings, V_C, d).T)
        rows.append(torch.cat(blocks, dim=1))
    blocks = []
    if use_t:
        blocks.append(instance_edges(embeddings, V_T, d))
    if use_c:
        blocks.append(instance_edges(embeddings, V_C, d))
    blocks.append(torch.eye(B, dtype=dtype))
    rows.append(torch.cat(blocks, dim=1))
    adjacency = torch.cat(rows, dim=0)

    node_parts = ([V_T] if use_t else []) + ([V_C] if use_c else []) + [embeddings]
    node_features = torch.cat(node_parts, dim=0)

    # task/class nodes read only task/class nodes; instances also read themselves
    N = T + C + B
    read_mask = torch.zeros((N, N), dtype=torch.bool)
    read_mask[:, : T + C] = True
    read_mask[T + C:, T + C:] = torch.eye(B, dtype=torch.bool)

    return AssociationGraph(
        node_features=node_features,
        adjacency=adjacency,
        read_mask=read_mask,
        num_task_nodes=T,
        num_class_nodes=C,
        instance_task_ids=task_ids,
        class_task=class_task,
    )


def topk_neighbors(adjacency: torch.Tensor, k: int, mask: Optional[torch.Tensor] = None) -> torch.Tensor:
    """
    Boolean N x N membership: row i holds the k highest-weight columns of
    A[i] among those the mask allows (ties -> lower index; i may pick itself).
    """
    N = int(adjacency.shape[0])
    if not 1 <= k <= N:
        raise ConfigurationError(f"neighbor size k={k} outside [1, {N}]")
    scores = adjacency.detach().cpu().numpy().astype(np.float64, copy=True)
    allowed = np.ones((N, N), dtype=bool) if mask is None else mask.cpu().numpy()
    scores[~allowed] = -np.inf
    order = np.argsort(-scores, axis=1, kind="stable")
    take = np.minimum(k, allowed.sum(axis=1))

    members = np.zeros((N, N), dtype=bool)
    for i in range(N):
        members[i, order[i, : take[i]]] = True
    return torch.from_numpy(members)
