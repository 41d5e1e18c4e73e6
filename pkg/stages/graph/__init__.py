# Association graph: node bank, edge families, assembly, neighborhoods
from .node_bank import NodeBank, recompute_node_bank, update_node_bank
from .association_graph import (
    AssociationGraph,
    GraphSettings,
    assemble,
    class_adjacency,
    class_edge,
    class_task_edges,
    instance_edges,
    task_adjacency,
    task_edge,
    topk_neighbors,
)

__all__ = [
    "NodeBank",
    "recompute_node_bank",
    "update_node_bank",
    "AssociationGraph",
    "GraphSettings",
    "assemble",
    "class_adjacency",
    "class_edge",
    "class_task_edges",
    "instance_edges",
    "task_adjacency",
    "task_edge",
    "topk_neighbors",
]
