"""
Association-graph training loop

Each iteration samples a batch per task, refreshes the task and class
nodes, propagates over the association graph, and takes one optimizer
step on  mean_t CE_t - beta * mean_c H(k_c).
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Sequence

import torch

from orchestrator.errors import NumericalError
from orchestrator.types import DatasetManifest, LabeledRecord, Method, TrainConfig, TrainLogEntry
from stages.graph.node_bank import NodeBank
from stages.model.param_store import ParamStore, init_params
from stages.objective.losses import forward_objective

from .batching import TrainBatchSampler


@dataclass
class TrainResult:
    params: ParamStore
    bank: NodeBank
    config: TrainConfig
    manifest: DatasetManifest
    log: List[TrainLogEntry] = field(default_factory=list)
    execution_time: float = 0.0

    @property
    def method(self) -> Method:
        return self.params.method


class AssociationGraphTrainer:
    """Runs the training loop for any model method (graph, erm, stl)"""

    def __init__(self, config: TrainConfig):
        self.config = config
        self.log_every = max(1, config.iterations // 10)
        self.logger = logging.getLogger(self.__class__.__name__)

    def _optimizer(self, params: ParamStore) -> torch.optim.Optimizer:
        momentum = self.config.momentum if self.config.optimizer == "sgd_momentum" else 0.0
        return torch.optim.SGD(params.tensors(), lr=self.config.learning_rate, momentum=momentum)

    def _check_gradients(self, params: ParamStore) -> None:
        for name, tensor in params.items():
            if tensor.grad is not None and not bool(torch.isfinite(tensor.grad).all()):
                raise NumericalError("non-finite gradient", name)

    def train(self, manifest: DatasetManifest, records: Sequence[LabeledRecord]) -> TrainResult:
        cfg = self.config
        start = time.time()
        self.logger.info(
            f"🚀 Training {cfg.method} model: T={manifest.num_tasks}, C={manifest.num_classes}, "
            f"d={cfg.embed_dim}, L={cfg.num_layers}, k={cfg.neighbor_size or 'full'}, beta={cfg.beta}"
        )

        params = init_params(cfg, manifest.input_dim, manifest.num_tasks, manifest.num_classes)
        params.requires_grad_(True)
        bank = NodeBank.empty(manifest.num_tasks, manifest.num_classes, cfg.embed_dim, cfg.node_decay)
        sampler = TrainBatchSampler(manifest, records, cfg.batch_size, cfg.seed)
        optimizer = self._optimizer(params)

        log: List[TrainLogEntry] = []
        for iteration in range(1, cfg.iterations + 1):
            batch = sampler.next_batch()
            optimizer.zero_grad(set_to_none=True)
            output = forward_objective(params, bank, batch, cfg, manifest)

            losses = output.breakdown
            if not math.isfinite(losses.total):
                raise NumericalError(f"training loss became non-finite at iteration {iteration}")
            output.total.backward()
            self._check_gradients(params)
            optimizer.step()
            bank = output.bank.detached()

            log.append(TrainLogEntry(iteration, losses.ce, losses.ae, losses.total, losses.average_assignment_entropy))
            if iteration % self.log_every == 0 or iteration == cfg.iterations:
                self.logger.info(
                    f"iter {iteration}/{cfg.iterations}: ce={losses.ce:.4f} "
                    f"ae={losses.ae:.4f} total={losses.total:.4f}"
                )

        params.requires_grad_(False)
        elapsed = time.time() - start
        self.logger.info(f"✅ Training finished in {elapsed:.2f}s")
        return TrainResult(params, bank, cfg, manifest, log, elapsed)


def train(manifest: DatasetManifest, records: Sequence[LabeledRecord], config: TrainConfig) -> TrainResult:
    return AssociationGraphTrainer(config).train(manifest, records)
