"""
ParamStore - every learnable tensor of a model under a stable name, plus a
flat enumeration of all scalars (index i always addresses the same entry)
"""
import bisect
from collections import OrderedDict
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
import torch

from orchestrator.errors import ShapeError
from orchestrator.types import ExtractorConfig, Method, TrainConfig

DTYPE = torch.float64


class ParamStore:
    """Ordered name -> tensor mapping; insertion order defines the flat enumeration"""

    def __init__(
        self,
        tensors: "OrderedDict[str, torch.Tensor]",
        method: Method,
        num_tasks: int,
        num_classes: int,
    ):
        self._tensors = OrderedDict((name, t.to(DTYPE)) for name, t in tensors.items())
        self.method = method
        self.num_tasks = num_tasks
        self.num_classes = num_classes
        self._offsets: List[int] = []
        total = 0
        for t in self._tensors.values():
            self._offsets.append(total)
            total += t.numel()
        self._size = total

    # ------------------------------------------------------------------ #
    # Mapping access
    # ------------------------------------------------------------------ #
    def __getitem__(self, name: str) -> torch.Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> List[str]:
        return list(self._tensors)

    def tensors(self) -> List[torch.Tensor]:
        return list(self._tensors.values())

    def items(self) -> Iterator[Tuple[str, torch.Tensor]]:
        return iter(self._tensors.items())

    def requires_grad_(self, flag: bool = True) -> "ParamStore":
        for t in self._tensors.values():
            t.requires_grad_(flag)
        return self

    # ------------------------------------------------------------------ #
    # Flat enumeration
    # ------------------------------------------------------------------ #
    @property
    def num_scalars(self) -> int:
        return self._size

    def locate(self, index: int) -> Tuple[str, Tuple[int, ...]]:
        if not 0 <= index < self._size:
            raise IndexError(f"scalar index {index} outside [0, {self._size})")
        slot = bisect.bisect_right(self._offsets, index) - 1
        name = self.names()[slot]
        local = index - self._offsets[slot]
        shape = self._tensors[name].shape
        position = tuple(int(i) for i in np.unravel_index(local, tuple(shape))) if len(shape) else ()
        return name, position

    def get_scalar(self, index: int) -> float:
        name, position = self.locate(index)
        return float(self._tensors[name].detach()[position])

    def set_scalar(self, index: int, value: float) -> None:
        name, position = self.locate(index)
        with torch.no_grad():
            self._tensors[name][position] = value

    def flat(self) -> np.ndarray:
        if not self._tensors:
            return np.zeros(0)
        return np.concatenate([t.detach().reshape(-1).numpy() for t in self._tensors.values()]).astype(np.float64)

    def load_flat(self, vector: np.ndarray) -> None:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self._size,):
            raise ShapeError(f"flat vector has shape {vector.shape}, expected ({self._size},)")
        with torch.no_grad():
            for offset, t in zip(self._offsets, self._tensors.values()):
                chunk = vector[offset:offset + t.numel()].reshape(tuple(t.shape))
                t.copy_(torch.from_numpy(chunk.copy()))

    def scalar_names(self) -> List[str]:
        """Human-readable label per flat index, e.g. 'gnn.0.W[1, 0]'"""
        labels = []
        for name, t in self._tensors.items():
            for local in range(t.numel()):
                position = np.unravel_index(local, tuple(t.shape)) if t.dim() else ()
                labels.append(f"{name}{list(int(i) for i in position)}")
        return labels

    # ------------------------------------------------------------------ #
    # Copies and conversion
    # ------------------------------------------------------------------ #
    def clone(self) -> "ParamStore":
        return ParamStore(
            OrderedDict((n, t.detach().clone()) for n, t in self._tensors.items()),
            self.method, self.num_tasks, self.num_classes,
        )

    def to_arrays(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((n, t.detach().numpy().copy()) for n, t in self._tensors.items())

    @classmethod
    def from_arrays(
        cls, arrays: Dict[str, np.ndarray], method: Method, num_tasks: int, num_classes: int
    ) -> "ParamStore":
        return cls(
            OrderedDict((n, torch.from_numpy(np.array(a, dtype=np.float64))) for n, a in arrays.items()),
            method, num_tasks, num_classes,
        )

    def equals(self, other: "ParamStore") -> bool:
        if self.names() != other.names():
            return False
        return all(torch.equal(self[n].detach(), other[n].detach()) for n in self.names())


# ---------------------------------------------------------------------- #
# Layout and initialization
# ---------------------------------------------------------------------- #
def extractor_scope(method: Method, task_id: Optional[int] = None) -> str:
    if method is Method.STL:
        if task_id is None:
            raise ShapeError("single-task models need a task id to pick their extractor")
        return f"task{task_id}.extractor"
    return "extractor"


def _layout(
    config: TrainConfig, input_dim: int, num_tasks: int, num_classes: int
) -> List[Tuple[str, Tuple[int, ...], int]]:
    """(name, shape, fan_in) for every tensor, in enumeration order"""
    method = config.model_method
    d = config.embed_dim
    extractor = ExtractorConfig.from_train_config(config, input_dim)
    layout: List[Tuple[str, Tuple[int, ...], int]] = []

    def add_extractor(scope: str) -> None:
        for i, (fan_out, fan_in) in enumerate(extractor.layer_shapes()):
            layout.append((f"{scope}.{i}.weight", (fan_out, fan_in), fan_in))
            layout.append((f"{scope}.{i}.bias", (fan_out,), fan_in))

    if method is Method.STL:
        for t in range(num_tasks):
            add_extractor(extractor_scope(method, t))
    else:
        add_extractor(extractor_scope(method))

    if method is Method.GRAPH:
        layout += [
            ("edge.W_T", (d,), d), ("edge.b_T", (1,), d),
            ("edge.W_C", (d,), d), ("edge.b_C", (1,), d),
        ]
        for layer in range(config.num_layers):
            layout.append((f"gnn.{layer}.W", (d, d), d))
            layout.append((f"gnn.{layer}.U", (d, 2 * d), 2 * d))

    if method is Method.STL:
        for t in range(num_tasks):
            layout.append((f"classifier.{t}.weight", (num_classes, d), d))
            layout.append((f"classifier.{t}.bias", (num_classes,), d))
    else:
        layout.append(("classifier.shared.weight", (num_classes, d), d))
        layout.append(("classifier.shared.bias", (num_classes,), d))
    return layout


def init_params(
    config: TrainConfig, input_dim: int, num_tasks: int, num_classes: int, seed: Optional[int] = None
) -> ParamStore:
    """
    uniform(-s, s) with s = init_scale / sqrt(fan_in); deterministic per seed.
    The half of every GNN combine matrix U acting on the previous embedding
    starts at init_scale * I instead.
    """
    generator = torch.Generator().manual_seed(config.seed if seed is None else seed)
    tensors: "OrderedDict[str, torch.Tensor]" = OrderedDict()
    d = config.embed_dim
    for name, shape, fan_in in _layout(config, input_dim, num_tasks, num_classes):
        bound = config.init_scale / np.sqrt(fan_in)
        draw = torch.rand(shape, generator=generator, dtype=DTYPE)
        tensors[name] = (2.0 * draw - 1.0) * bound
        if name.startswith("gnn.") and name.endswith(".U"):
            tensors[name][:, d:] = config.init_scale * torch.eye(d, dtype=DTYPE)
    return ParamStore(tensors, config.model_method, num_tasks, num_classes)
