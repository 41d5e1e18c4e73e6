"""Graph-free baselines sharing the training loop"""
from dataclasses import replace
from typing import Sequence

from orchestrator.types import DatasetManifest, LabeledRecord, Method, TrainConfig

from .trainer import TrainResult, train


def train_erm_baseline(manifest: DatasetManifest, records: Sequence[LabeledRecord], config: TrainConfig) -> TrainResult:
    """One extractor and one classifier over the pooled data of all tasks"""
    return train(manifest, records, replace(config, method=Method.ERM.value))


def train_stl_baseline(manifest: DatasetManifest, records: Sequence[LabeledRecord], config: TrainConfig) -> TrainResult:
    """An independent extractor and classifier per task"""
    return train(manifest, records, replace(config, method=Method.STL.value))
