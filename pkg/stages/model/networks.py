"""Feature extractors and the shared or task-specific classifiers"""
from typing import Optional, Union

import numpy as np
import torch

from orchestrator.errors import ShapeError
from orchestrator.types import Method

from .param_store import DTYPE, ParamStore, extractor_scope

TaskIds = Union[int, torch.Tensor, np.ndarray, None]

SHARED_HEAD = "classifier.shared.weight"


def as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x if x.dtype == DTYPE else x.to(DTYPE)
    return torch.as_tensor(np.asarray(x, dtype=np.float64))


def _task_vector(task_ids: TaskIds, rows: int) -> Optional[torch.Tensor]:
    if task_ids is None:
        return None
    if isinstance(task_ids, (int, np.integer)):
        return torch.full((rows,), int(task_ids), dtype=torch.long)
    ids = torch.as_tensor(np.asarray(task_ids) if not isinstance(task_ids, torch.Tensor) else task_ids)
    ids = ids.to(torch.long).reshape(-1)
    if ids.numel() != rows:
        raise ShapeError(f"{ids.numel()} task ids for {rows} rows")
    return ids


def _run_extractor(params: ParamStore, scope: str, h: torch.Tensor) -> torch.Tensor:
    layer = 0
    while f"{scope}.{layer}.weight" in params:
        weight = params[f"{scope}.{layer}.weight"]
        bias = params[f"{scope}.{layer}.bias"]
        if h.shape[-1] != weight.shape[1]:
            raise ShapeError(f"{scope}.{layer} expects width {weight.shape[1]}, got {h.shape[-1]}")
        h = h @ weight.T + bias
        if f"{scope}.{layer + 1}.weight" in params:
            h = torch.relu(h)
        layer += 1
    return h


def embed(params: ParamStore, x, task_ids: TaskIds = None) -> torch.Tensor:
    """
    E(x): rectifier network on a vector (d_in,) or batch (B, d_in).
    Single-task models route each row through its own task's extractor.
    """
    x = as_tensor(x)
    single = x.dim() == 1
    h = x.unsqueeze(0) if single else x
    if h.dim() != 2:
        raise ShapeError(f"embed expects a vector or a matrix, got shape {tuple(x.shape)}")

    if params.method is Method.STL:
        ids = _task_vector(task_ids, h.shape[0])
        if ids is None:
            raise ShapeError("single-task models need task ids to embed")
        out = None
        for t in torch.unique(ids).tolist():
            rows = (ids == t).nonzero(as_tuple=True)[0]
            part = _run_extractor(params, extractor_scope(params.method, t), h[rows])
            if out is None:
                out = h.new_zeros((h.shape[0], part.shape[1]))
            out = out.index_put((rows,), part)
        if out is None:
            width = params[f"{extractor_scope(params.method, 0)}.0.weight"].shape[0]
            out = h.new_zeros((0, width))
    else:
        out = _run_extractor(params, extractor_scope(params.method), h)
    return out[0] if single else out


def classify(params: ParamStore, task_ids: TaskIds, features) -> torch.Tensor:
    """
    Logits over the entire label space for each (task, feature) row. Graph
    and ERM models hold one head for all tasks; single-task models one per task.
    """
    features = as_tensor(features)
    single = features.dim() == 1
    h = features.unsqueeze(0) if single else features

    if SHARED_HEAD in params:
        weight = params[SHARED_HEAD]
        bias = params["classifier.shared.bias"]
        if h.shape[-1] != weight.shape[1]:
            raise ShapeError(f"classifier expects width {weight.shape[1]}, got {h.shape[-1]}")
        logits = h @ weight.T + bias
    else:
        ids = _task_vector(task_ids, h.shape[0])
        if ids is None:
            raise ShapeError("task-specific classifiers need task ids")
        if ids.numel() and not (0 <= int(ids.min()) and int(ids.max()) < params.num_tasks):
            raise ShapeError(f"task id outside [0, {params.num_tasks})")
        weights = torch.stack([params[f"classifier.{t}.weight"] for t in range(params.num_tasks)])
        biases = torch.stack([params[f"classifier.{t}.bias"] for t in range(params.num_tasks)])
        if h.shape[-1] != weights.shape[2]:
            raise ShapeError(f"classifier expects width {weights.shape[2]}, got {h.shape[-1]}")
        logits = torch.einsum("bcd,bd->bc", weights[ids], h) + biases[ids]
    return logits[0] if single else logits
