from .gnn_layers import (
    GnnLayer,
    enhance_instances,
    gnn_layers,
    layer_forward,
    neighbor_weights,
    neighborhoods_for,
    propagate,
)

__all__ = [
    "GnnLayer",
    "enhance_instances",
    "gnn_layers",
    "layer_forward",
    "neighbor_weights",
    "neighborhoods_for",
    "propagate",
]
