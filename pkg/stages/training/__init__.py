from .batching import TrainBatchSampler
from .trainer import AssociationGraphTrainer, TrainResult, train
from .baselines import train_erm_baseline, train_stl_baseline
from .checkpoint import checkpoint_payload, read_checkpoint, write_checkpoint

__all__ = [
    "TrainBatchSampler",
    "AssociationGraphTrainer",
    "TrainResult",
    "train",
    "train_erm_baseline",
    "train_stl_baseline",
    "checkpoint_payload",
    "read_checkpoint",
    "write_checkpoint",
]
