"""Trained model <-> MTCS-CKPT v1 file"""
import logging
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import torch

from orchestrator.errors import DataFormatError
from orchestrator.serialize import load_checkpoint, save_checkpoint
from orchestrator.types import DatasetManifest, Method, TrainConfig
from stages.graph.node_bank import NodeBank
from stages.model.param_store import DTYPE, ParamStore

from .trainer import TrainResult

logger = logging.getLogger(__name__)

BANK_TENSORS = ("V_T", "V_C", "V_T_seen", "V_C_seen")


def checkpoint_payload(result: TrainResult):
    manifest = result.manifest
    config: Dict[str, Any] = {
        "method": result.method.value,
        "node_decay": float(result.bank.decay),
        "manifest": {
            "num_tasks": manifest.num_tasks,
            "num_classes": manifest.num_classes,
            "input_dim": manifest.input_dim,
            "class_names": list(manifest.class_names),
            "observed_classes": [list(s) for s in manifest.observed_classes],
        },
        "train": result.config.to_dict(),
    }
    tensors: "OrderedDict[str, np.ndarray]" = OrderedDict(result.params.to_arrays())
    bank = result.bank
    tensors["V_T"] = bank.task_nodes.detach().numpy()
    tensors["V_C"] = bank.class_nodes.detach().numpy()
    tensors["V_T_seen"] = bank.task_seen.numpy().astype(np.float64)
    tensors["V_C_seen"] = bank.class_seen.numpy().astype(np.float64)
    return config, tensors


def write_checkpoint(path: Union[str, Path], result: TrainResult) -> None:
    config, tensors = checkpoint_payload(result)
    save_checkpoint(path, config, tensors)
    logger.info(f"💾 Checkpoint written to {path} ({result.params.num_scalars} parameters)")


def read_checkpoint(path: Union[str, Path]) -> TrainResult:
    config, tensors = load_checkpoint(path)
    try:
        method = Method(config["method"])
        train_config = TrainConfig.from_dict(config["train"])
        info = config["manifest"]
        manifest = DatasetManifest(
            num_tasks=int(info["num_tasks"]),
            num_classes=int(info["num_classes"]),
            input_dim=int(info["input_dim"]),
            class_names=tuple(str(n) for n in info["class_names"]),
            observed_classes=tuple(tuple(int(c) for c in s) for s in info["observed_classes"]),
        )
        decay = float(config["node_decay"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"checkpoint config section is incomplete: {exc}") from exc

    missing = [name for name in BANK_TENSORS if name not in tensors]
    if missing:
        raise DataFormatError(f"checkpoint lacks node bank tensors {missing}")

    arrays = OrderedDict((n, a) for n, a in tensors.items() if n not in BANK_TENSORS)
    params = ParamStore.from_arrays(arrays, method, manifest.num_tasks, manifest.num_classes)
    bank = NodeBank(
        torch.as_tensor(tensors["V_T"], dtype=DTYPE),
        torch.as_tensor(tensors["V_C"], dtype=DTYPE),
        torch.as_tensor(tensors["V_T_seen"] > 0.5),
        torch.as_tensor(tensors["V_C_seen"] > 0.5),
        decay,
    )
    return TrainResult(params, bank, train_config, manifest)
