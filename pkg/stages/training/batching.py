"""Per-task mini-batches, drawn without replacement and reshuffled every epoch"""
import logging
from typing import Dict, List, Sequence

import numpy as np
import torch

from orchestrator.errors import ConfigurationError
from orchestrator.types import Batch, DatasetManifest, LabeledRecord, Split
from stages.datagen.synth_generator import records_to_arrays
from stages.model.param_store import DTYPE


class TrainBatchSampler:
    """
    Every call to `next_batch` yields `batch_size` training instances of
    each task, stacked task by task. A task's epoch ends when its
    permutation runs out; the remainder is topped up from a fresh one.
    """

    def __init__(self, manifest: DatasetManifest, records: Sequence[LabeledRecord], batch_size: int, seed: int):
        self.logger = logging.getLogger(self.__class__.__name__)
        self.batch_size = batch_size
        self.rng = np.random.default_rng(seed)

        train = [r for r in records if r.split is Split.TRAIN]
        arrays = records_to_arrays(train, manifest.input_dim)
        self.features = arrays["features"]
        self.task_ids = arrays["task_ids"]
        self.class_ids = arrays["class_ids"]

        self.members: Dict[int, np.ndarray] = {}
        for t in range(manifest.num_tasks):
            rows = np.flatnonzero(self.task_ids == t)
            if rows.size == 0 and batch_size > 0:
                raise ConfigurationError(f"task {t} has no training records after the category shift")
            self.members[t] = rows

        self._order: Dict[int, np.ndarray] = {}
        self._cursor: Dict[int, int] = {}
        self.epochs: Dict[int, int] = {t: 0 for t in self.members}
        for t in self.members:
            self._reshuffle(t)
        self.epochs = {t: 0 for t in self.members}

    def _reshuffle(self, task_id: int) -> None:
        self._order[task_id] = self.rng.permutation(self.members[task_id])
        self._cursor[task_id] = 0
        self.epochs[task_id] += 1

    def _draw(self, task_id: int) -> List[int]:
        picked: List[int] = []
        while len(picked) < self.batch_size:
            order = self._order[task_id]
            cursor = self._cursor[task_id]
            if cursor >= order.size:
                self._reshuffle(task_id)
                continue
            take = min(self.batch_size - len(picked), order.size - cursor)
            picked.extend(int(i) for i in order[cursor:cursor + take])
            self._cursor[task_id] = cursor + take
        return picked

    def next_batch(self) -> Batch:
        rows = [i for t in sorted(self.members) for i in self._draw(t)]
        index = np.asarray(rows, dtype=np.int64)
        return Batch(
            features=torch.as_tensor(self.features[index], dtype=DTYPE),
            task_ids=torch.as_tensor(self.task_ids[index], dtype=torch.long),
            class_ids=torch.as_tensor(self.class_ids[index], dtype=torch.long),
        )
