"""
Synthetic multi-task data - every task shares the label space but sees
its own affine distortion of the same class-conditional Gaussians
"""
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from orchestrator.types import DatasetManifest, LabeledRecord, Split, SynthConfig


class SyntheticDataGenerator:
    """
    Draws class means once, one random affine map per task, then samples
    train and test records for every (task, class) pair.
    """

    def __init__(self, config: SynthConfig):
        config.validate()
        self.config = config
        self.logger = logging.getLogger(self.__class__.__name__)

    def generate(self) -> Tuple[DatasetManifest, List[LabeledRecord]]:
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        T, C, D = cfg.num_tasks, cfg.num_classes, cfg.input_dim

        directions = rng.standard_normal((C, D))
        norms = np.linalg.norm(directions, axis=1, keepdims=True)
        class_means = cfg.class_separation * directions / np.maximum(norms, 1e-12)

        transforms = []
        for _ in range(T):
            mixing = np.eye(D) + cfg.task_shift * rng.standard_normal((D, D)) / np.sqrt(D)
            offset = cfg.task_shift * rng.standard_normal(D)
            transforms.append((mixing, offset))

        records: List[LabeledRecord] = []
        for split, per_class in ((Split.TRAIN, cfg.train_per_class), (Split.TEST, cfg.test_per_class)):
            for t, (mixing, offset) in enumerate(transforms):
                for c in range(C):
                    latent = class_means[c] + rng.standard_normal((per_class, D))
                    samples = latent @ mixing.T + offset
                    records.extend(
                        LabeledRecord(t, c, split, tuple(float(v) for v in row)) for row in samples
                    )

        manifest = DatasetManifest(
            num_tasks=T,
            num_classes=C,
            input_dim=D,
            class_names=tuple(f"class{c}" for c in range(C)),
            observed_classes=tuple(tuple(range(C)) for _ in range(T)),
        )
        self.logger.info(
            f"Generated {len(records)} records: T={T}, C={C}, d_in={D}, seed={cfg.seed}"
        )
        return manifest, records


def generate_synthetic(config: SynthConfig) -> Tuple[DatasetManifest, List[LabeledRecord]]:
    return SyntheticDataGenerator(config).generate()


def summarize_records(records: Sequence[LabeledRecord]) -> pd.DataFrame:
    """Record counts per (split, task, class)"""
    frame = pd.DataFrame(
        {
            "split": [r.split.value for r in records],
            "task": [r.task_id for r in records],
            "class": [r.class_id for r in records],
        }
    )
    if frame.empty:
        return pd.DataFrame(columns=["split", "task", "class", "count"])
    return frame.groupby(["split", "task", "class"]).size().reset_index(name="count")


def records_to_arrays(
    records: Sequence[LabeledRecord], input_dim: Optional[int] = None
) -> Dict[str, Any]:
    """Stack records into feature / task / class arrays"""
    if not records:
        dim = input_dim or 0
        return {
            "features": np.zeros((0, dim)),
            "task_ids": np.zeros(0, dtype=np.int64),
            "class_ids": np.zeros(0, dtype=np.int64),
        }
    return {
        "features": np.asarray([r.features for r in records], dtype=np.float64),
        "task_ids": np.asarray([r.task_id for r in records], dtype=np.int64),
        "class_ids": np.asarray([r.class_id for r in records], dtype=np.int64),
    }
