import unittest
import math
import tempfile
import numpy as np
import torch
import sys
import os
from dataclasses import replace
from pathlib import Path

# Add the project root to the path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from orchestrator.errors import ConfigurationError, DataFormatError, NumericalError
from orchestrator.serialize import save_checkpoint
from orchestrator.types import LabeledRecord, Method, Split, SynthConfig, TrainConfig
from stages.datagen import apply_category_shift, generate_synthetic, random_assignment
from stages.evaluation import Evaluator
from stages.graph import NodeBank
from stages.model import classify, embed, init_params
from stages.objective import cross_entropy, gradient
from stages.training import (
    AssociationGraphTrainer,
    TrainBatchSampler,
    checkpoint_payload,
    read_checkpoint,
    train,
    train_erm_baseline,
    train_stl_baseline,
    write_checkpoint,
)


def small_dataset(rate=0.5, seed=0):
    manifest, records = generate_synthetic(SynthConfig(num_tasks=2, num_classes=4, input_dim=3,
                                                       train_per_class=6, test_per_class=3, seed=seed))
    return apply_category_shift(manifest, records, random_assignment(2, 4, rate, seed))


class TestBatchSampler(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.manifest, self.records = generate_synthetic(SynthConfig(num_tasks=2, num_classes=3, input_dim=2,
                                                                     train_per_class=4, test_per_class=1))

    def test_batches_are_stacked_by_task(self):
        sampler = TrainBatchSampler(self.manifest, self.records, batch_size=3, seed=0)
        batch = sampler.next_batch()
        self.assertEqual(batch.size, 6)
        self.assertEqual(batch.task_ids.tolist(), [0, 0, 0, 1, 1, 1])

    def test_epoch_visits_every_record_once(self):
        sampler = TrainBatchSampler(self.manifest, self.records, batch_size=4, seed=1)
        drawn = np.concatenate([sampler.next_batch().features[:4].numpy() for _ in range(3)])
        expected = sampler.features[sampler.members[0]]
        np.testing.assert_array_equal(np.sort(drawn, axis=0), np.sort(expected, axis=0))
        self.assertEqual(sampler.epochs[0], 0)
        sampler.next_batch()
        self.assertEqual(sampler.epochs[0], 1)

    def test_same_seed_same_batches(self):
        a = TrainBatchSampler(self.manifest, self.records, batch_size=2, seed=9)
        b = TrainBatchSampler(self.manifest, self.records, batch_size=2, seed=9)
        for _ in range(10):
            self.assertTrue(torch.equal(a.next_batch().features, b.next_batch().features))

    def test_labels_follow_features(self):
        sampler = TrainBatchSampler(self.manifest, self.records, batch_size=5, seed=2)
        lookup = {tuple(r.features): (r.task_id, r.class_id) for r in self.records if r.split is Split.TRAIN}
        batch = sampler.next_batch()
        for row, t, c in zip(batch.features.numpy(), batch.task_ids.tolist(), batch.class_ids.tolist()):
            self.assertEqual(lookup[tuple(row.tolist())], (t, c))

    def test_task_without_training_records(self):
        records = [r for r in self.records if r.split is Split.TEST or r.task_id == 0]
        with self.assertRaises(ConfigurationError):
            TrainBatchSampler(self.manifest, records, batch_size=2, seed=0)


class TestTrainer(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.manifest, self.records = small_dataset()
        self.config = TrainConfig(embed_dim=3, num_layers=1, batch_size=2, iterations=6,
                                  learning_rate=0.1, beta=0.2, seed=3)

    def test_zero_learning_rate_keeps_init(self):
        config = replace(self.config, learning_rate=0.0)
        result = train(self.manifest, self.records, config)
        self.assertTrue(result.params.equals(init_params(config, 3, 2, 4)))
        self.assertEqual(len(result.log), 6)

    def one_step_oracle(self, config):
        config = replace(config, iterations=1)
        result = train(self.manifest, self.records, config)
        start = init_params(config, 3, 2, 4)
        batch = TrainBatchSampler(self.manifest, self.records, config.batch_size, config.seed).next_batch()
        bank = NodeBank.empty(2, 4, config.embed_dim, config.node_decay)
        grad = gradient(start.clone(), bank, batch, config, self.manifest)
        np.testing.assert_allclose(result.params.flat(), start.flat() - config.learning_rate * grad, rtol=0, atol=1e-12)

    def test_one_step_matches_gradient(self):
        self.one_step_oracle(self.config)

    def test_one_step_matches_gradient_erm(self):
        self.one_step_oracle(replace(self.config, method='erm'))

    def test_deterministic(self):
        first = train(self.manifest, self.records, self.config)
        second = train(self.manifest, self.records, self.config)
        self.assertTrue(first.params.equals(second.params))
        self.assertTrue(torch.equal(first.bank.class_nodes, second.bank.class_nodes))
        with tempfile.TemporaryDirectory() as tmp:
            write_checkpoint(Path(tmp, 'a.ckpt'), first)
            write_checkpoint(Path(tmp, 'b.ckpt'), second)
            self.assertEqual(Path(tmp, 'a.ckpt').read_bytes(), Path(tmp, 'b.ckpt').read_bytes())

    def test_log_is_finite(self):
        result = train(self.manifest, self.records, self.config)
        self.assertEqual([e.iteration for e in result.log], list(range(1, 7)))
        for entry in result.log:
            for value in (entry.ce, entry.ae, entry.total, entry.avg_entropy):
                self.assertTrue(math.isfinite(value))
            self.assertAlmostEqual(entry.total, entry.ce - 0.2 * entry.ae, places=12)

    def test_without_layers_or_entropy_training_ignores_the_graph(self):
        """Reproduce L=0, beta=0 training with a plain embed-classify loop"""
        config = replace(self.config, num_layers=0, beta=0.0)
        result = train(self.manifest, self.records, config)

        params = init_params(config, 3, 2, 4).requires_grad_(True)
        optimizer = torch.optim.SGD(params.tensors(), lr=config.learning_rate)
        sampler = TrainBatchSampler(self.manifest, self.records, config.batch_size, config.seed)
        for _ in range(config.iterations):
            batch = sampler.next_batch()
            optimizer.zero_grad(set_to_none=True)
            losses = cross_entropy(classify(params, batch.task_ids, embed(params, batch.features)), batch.class_ids)
            per_task = [losses[batch.task_ids == t].mean() for t in range(2)]
            torch.stack(per_task).mean().backward()
            optimizer.step()
        np.testing.assert_allclose(result.params.flat(), params.flat(), rtol=0, atol=1e-12)

    def test_momentum_changes_the_path(self):
        plain = train(self.manifest, self.records, self.config)
        heavy = train(self.manifest, self.records, replace(self.config, optimizer='sgd_momentum'))
        self.assertFalse(plain.params.equals(heavy.params))

    def test_non_finite_loss(self):
        records = [
            LabeledRecord(r.task_id, r.class_id, r.split, (float('inf'),) + r.features[1:])
            if r.split is Split.TRAIN else r
            for r in self.records
        ]
        with self.assertRaises(NumericalError):
            AssociationGraphTrainer(replace(self.config, method='erm')).train(self.manifest, records)

    def test_baselines(self):
        erm = train_erm_baseline(self.manifest, self.records, self.config)
        stl = train_stl_baseline(self.manifest, self.records, self.config)
        self.assertEqual(erm.method, Method.ERM)
        self.assertEqual(stl.method, Method.STL)
        self.assertIn('task1.extractor.0.weight', stl.params)
        self.assertEqual(len(stl.log), self.config.iterations)

    def test_baselines_keep_no_node_bank(self):
        for result in (train_erm_baseline(self.manifest, self.records, self.config),
                       train_stl_baseline(self.manifest, self.records, self.config)):
            self.assertFalse(bool(result.bank.task_seen.any()))
            self.assertFalse(bool(result.bank.class_seen.any()))
            self.assertTrue(all(entry.ae == 0.0 for entry in result.log))
            self.assertTrue(all(entry.total == entry.ce for entry in result.log))
            report = Evaluator(self.config).evaluate(result.params, result.bank, self.manifest, self.records)
            self.assertTrue(math.isfinite(report.avg_assignment_entropy))

    def test_default_depth_learns_observed_classes(self):
        """Four GNN layers over the full graph train well above guessing"""
        manifest, records = generate_synthetic(SynthConfig(num_tasks=4, num_classes=8, input_dim=8,
                                                           train_per_class=12, test_per_class=10, seed=2))
        manifest, records = apply_category_shift(manifest, records, random_assignment(4, 8, 0.5, 2))
        config = TrainConfig(embed_dim=8, num_layers=4, beta=0.1, batch_size=8, iterations=300, seed=2)
        result = train(manifest, records, config)
        report = Evaluator(config).evaluate(result.params, result.bank, manifest, records)

        # guessing among a task's four observed classes scores 25%
        self.assertGreater(report.observed_accuracy, 40.0)
        self.assertLess(result.log[-1].ce, result.log[0].ce)


class TestCheckpoint(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.manifest, self.records = small_dataset(seed=1)
        config = TrainConfig(embed_dim=2, num_layers=1, batch_size=2, iterations=3, seed=1)
        self.result = train(self.manifest, self.records, config)
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name, 'graph.ckpt')

    def tearDown(self):
        self.tmp.cleanup()

    def test_restores_model(self):
        write_checkpoint(self.path, self.result)
        restored = read_checkpoint(self.path)
        self.assertTrue(restored.params.equals(self.result.params))
        self.assertTrue(torch.equal(restored.bank.task_nodes, self.result.bank.task_nodes))
        self.assertTrue(torch.equal(restored.bank.class_seen, self.result.bank.class_seen))
        self.assertEqual(restored.manifest, self.manifest)
        self.assertEqual(restored.config, self.result.config)
        self.assertEqual(restored.method, Method.GRAPH)

    def test_header_starts_file(self):
        write_checkpoint(self.path, self.result)
        self.assertTrue(self.path.read_text(encoding='utf-8').startswith('MTCS-CKPT v1\n'))

    def test_truncated_file(self):
        write_checkpoint(self.path, self.result)
        lines = self.path.read_text(encoding='utf-8').split('\n')
        self.path.write_text('\n'.join(lines[:-3]) + '\n', encoding='utf-8')
        with self.assertRaises(DataFormatError):
            read_checkpoint(self.path)

    def test_config_section_not_yaml(self):
        write_checkpoint(self.path, self.result)
        lines = self.path.read_text(encoding='utf-8').split('\n')
        lines.insert(2, 'embed_dim: [2')
        self.path.write_text('\n'.join(lines), encoding='utf-8')
        with self.assertRaises(DataFormatError):
            read_checkpoint(self.path)

    def test_undecodable_checkpoint(self):
        write_checkpoint(self.path, self.result)
        self.path.write_bytes(self.path.read_bytes().replace(b'section config\n', b'section config\n\xff\xfe\n', 1))
        with self.assertRaises(DataFormatError):
            read_checkpoint(self.path)

    def test_missing_bank(self):
        config, tensors = checkpoint_payload(self.result)
        for name in ('V_T', 'V_C', 'V_T_seen', 'V_C_seen'):
            del tensors[name]
        save_checkpoint(self.path, config, tensors)
        with self.assertRaises(DataFormatError):
            read_checkpoint(self.path)


if __name__ == '__main__':
    # Create a test suite
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()
    for case in (TestBatchSampler, TestTrainer, TestCheckpoint):
        suite.addTests(loader.loadTestsFromTestCase(case))

    # Run the tests
    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)

    # Exit with error code if tests failed
    sys.exit(not result.wasSuccessful())
