"""
GraphSAGE-style layers over the association graph:
    h_i' = U [ mean_{j in N_k(i)} ReLU(W h_j) ; h_i ]
where the mean over the top-k neighborhood is taken with the graph's edge
weights. A boolean neighborhood gives every member weight one.
"""
from dataclasses import dataclass
from typing import List, Optional, Tuple

import torch

from orchestrator.errors import ShapeError
from stages.graph.association_graph import AssociationGraph, GraphSettings, assemble, topk_neighbors
from stages.graph.node_bank import NodeBank
from stages.model.param_store import ParamStore


@dataclass
class GnnLayer:
    W: torch.Tensor   # d x d message transform
    U: torch.Tensor   # d x 2d combine transform on [aggregate; previous]

    def __post_init__(self):
        d = self.W.shape[0]
        if tuple(self.W.shape) != (d, d) or tuple(self.U.shape) != (d, 2 * d):
            raise ShapeError(f"GNN layer shapes W{tuple(self.W.shape)}, U{tuple(self.U.shape)} are inconsistent")


def gnn_layers(params: ParamStore) -> List[GnnLayer]:
    layers = []
    while f"gnn.{len(layers)}.W" in params:
        i = len(layers)
        layers.append(GnnLayer(params[f"gnn.{i}.W"], params[f"gnn.{i}.U"]))
    return layers


def _forward_rows(
    layer: GnnLayer, embeddings: torch.Tensor, weights: torch.Tensor, first_row: int
) -> torch.Tensor:
    """Outputs for rows first_row .. first_row + len(weights) reading all N columns"""
    weights = weights.to(embeddings.dtype)
    empty = (weights > 0).sum(dim=1) == 0
    if bool(empty.any()):
        rows = torch.nonzero(empty, as_tuple=True)[0]
        fallback = torch.zeros_like(weights)
        fallback[rows, rows + first_row] = 1.0
        weights = torch.where(empty.unsqueeze(1), fallback, weights)

    messages = torch.relu(embeddings @ layer.W.T)
    aggregate = (weights @ messages) / weights.sum(dim=1, keepdim=True)
    previous = embeddings[first_row:first_row + weights.shape[0]]
    return torch.cat([aggregate, previous], dim=1) @ layer.U.T


def layer_forward(layer: GnnLayer, embeddings: torch.Tensor, neighborhoods: torch.Tensor) -> torch.Tensor:
    """
    `neighborhoods` is N x N: boolean membership (plain mean) or non-negative
    edge weights (weighted mean, zero = not a neighbor), already filtered by
    the read mask. A node with an empty neighborhood aggregates only itself.
    """
    if neighborhoods.shape != (embeddings.shape[0], embeddings.shape[0]):
        raise ShapeError(f"neighborhoods {tuple(neighborhoods.shape)} do not match {embeddings.shape[0]} nodes")
    return _forward_rows(layer, embeddings, neighborhoods, 0)


def neighborhoods_for(graph: AssociationGraph, neighbor_size: Optional[int]) -> torch.Tensor:
    N = graph.num_nodes
    k = N if neighbor_size is None else min(neighbor_size, N)
    return topk_neighbors(graph.adjacency, k, graph.read_mask)


def neighbor_weights(graph: AssociationGraph, neighbor_size: Optional[int] = None) -> torch.Tensor:
    """Edge weights restricted to each node's top-k neighborhood"""
    members = neighborhoods_for(graph, neighbor_size)
    return torch.where(members, graph.adjacency, torch.zeros_like(graph.adjacency))


def propagate(
    layers: List[GnnLayer], graph: AssociationGraph, neighbor_size: Optional[int] = None
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Apply every layer with one weighted neighborhood structure computed from
    the initial adjacency. Returns (all node embeddings, instance rows).
    """
    hidden = graph.node_features
    if not layers:
        return hidden, hidden[graph.instance_offset:]

    weights = neighbor_weights(graph, neighbor_size)
    P = graph.instance_offset
    # task/class rows never read instances: solve them on the P x P block so
    # they come out bit-identical whatever the batch holds
    split = 0 < P < graph.num_nodes and not bool((weights[:P, P:] != 0).any())
    for layer in layers:
        if split:
            head = _forward_rows(layer, hidden[:P], weights[:P, :P], 0)
            tail = _forward_rows(layer, hidden, weights[P:], P)
            hidden = torch.cat([head, tail], dim=0)
        else:
            hidden = layer_forward(layer, hidden, weights)
    return hidden, hidden[P:]


def enhance_instances(
    params: ParamStore,
    bank: NodeBank,
    embeddings: torch.Tensor,
    task_ids: torch.Tensor,
    settings: GraphSettings,
) -> torch.Tensor:
    """Enhanced instance features; without GNN layers the graph is never built"""
    layers = gnn_layers(params)
    if not layers:
        return embeddings
    graph = assemble(bank, params, embeddings, task_ids, settings)
    _, instances = propagate(layers, graph, settings.neighbor_size)
    return instances
