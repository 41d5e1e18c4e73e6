import unittest
import numpy as np
import torch
import sys
import os
from collections import OrderedDict

# Add the project root to the path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from orchestrator.errors import ShapeError
from orchestrator.types import ExtractorConfig, Method, TrainConfig
from stages.model import ParamStore, classify, embed, init_params


def relu(x):
    return np.maximum(x, 0.0)


class TestParamStore(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.config = TrainConfig(embed_dim=3, num_layers=2, seed=5)
        self.params = init_params(self.config, input_dim=4, num_tasks=2, num_classes=5)

    def test_layout(self):
        names = self.params.names()
        self.assertEqual(names[:2], ['extractor.0.weight', 'extractor.0.bias'])
        self.assertIn('edge.W_T', names)
        self.assertIn('gnn.1.U', names)
        self.assertEqual(tuple(self.params['gnn.1.U'].shape), (3, 6))
        self.assertEqual(tuple(self.params['edge.W_C'].shape), (3,))
        self.assertEqual(tuple(self.params['classifier.shared.weight'].shape), (5, 3))
        self.assertNotIn('classifier.1.weight', self.params)
        self.assertEqual(tuple(self.params['extractor.2.weight'].shape), (3, 3))

    def test_gnn_combine_starts_from_identity(self):
        for layer in (0, 1):
            U = self.params[f'gnn.{layer}.U'].numpy()
            np.testing.assert_array_equal(U[:, 3:], np.eye(3))
            self.assertLessEqual(np.abs(U[:, :3]).max(), 1.0 / np.sqrt(6))
            self.assertTrue(np.any(U[:, :3] != 0.0))
        scaled = init_params(TrainConfig(embed_dim=3, num_layers=1, init_scale=0.5), 4, 2, 5)
        np.testing.assert_array_equal(scaled['gnn.0.U'].numpy()[:, 3:], 0.5 * np.eye(3))

    def test_extractor_config(self):
        shapes = ExtractorConfig.from_train_config(self.config, 4).layer_shapes()
        self.assertEqual(shapes, [(3, 4), (3, 3), (3, 3)])

    def test_same_seed_same_store(self):
        again = init_params(self.config, input_dim=4, num_tasks=2, num_classes=5)
        self.assertTrue(self.params.equals(again))

    def test_different_seed_differs(self):
        other = init_params(self.config, input_dim=4, num_tasks=2, num_classes=5, seed=6)
        self.assertFalse(self.params.equals(other))

    def test_zero_init_scale(self):
        config = TrainConfig(embed_dim=3, num_layers=1, init_scale=0.0)
        params = init_params(config, input_dim=4, num_tasks=2, num_classes=5)
        self.assertTrue(np.all(params.flat() == 0.0))

    def test_uniform_bounds(self):
        weight = self.params['extractor.0.weight'].numpy()
        self.assertLessEqual(np.abs(weight).max(), 1.0 / np.sqrt(4))

    def test_flat_enumeration_round_trip(self):
        n = self.params.num_scalars
        self.assertEqual(n, len(self.params.flat()))
        for i in (0, 7, n // 2, n - 1):
            before = self.params.flat()
            self.params.set_scalar(i, 42.5)
            self.assertEqual(self.params.get_scalar(i), 42.5)
            after = self.params.flat()
            changed = np.flatnonzero(before != after)
            self.assertTrue(len(changed) <= 1)
            if len(changed):
                self.assertEqual(changed[0], i)

    def test_locate_is_stable(self):
        labels = self.params.scalar_names()
        for i in (0, 12, self.params.num_scalars - 1):
            name, position = self.params.locate(i)
            self.assertEqual(labels[i], f"{name}{list(position)}")
        with self.assertRaises(IndexError):
            self.params.locate(self.params.num_scalars)

    def test_load_flat(self):
        vector = np.arange(self.params.num_scalars, dtype=np.float64)
        self.params.load_flat(vector)
        np.testing.assert_array_equal(self.params.flat(), vector)
        with self.assertRaises(ShapeError):
            self.params.load_flat(vector[:-1])

    def test_clone_is_independent(self):
        copy = self.params.clone()
        copy.set_scalar(0, 9.0)
        self.assertNotEqual(self.params.get_scalar(0), 9.0)

    def test_baseline_layouts(self):
        erm = init_params(TrainConfig(embed_dim=3, method='erm'), 4, 2, 5)
        self.assertIn('classifier.shared.weight', erm)
        self.assertNotIn('edge.W_T', erm)
        self.assertFalse(any(n.startswith('gnn.') for n in erm.names()))

        stl = init_params(TrainConfig(embed_dim=3, method='stl'), 4, 2, 5)
        self.assertIn('task1.extractor.0.weight', stl)
        self.assertIn('classifier.0.bias', stl)
        self.assertEqual(stl.method, Method.STL)


def dense_store(layers, heads, method=Method.GRAPH, num_classes=2):
    tensors = OrderedDict()
    for i, (w, b) in enumerate(layers):
        tensors[f'extractor.{i}.weight'] = torch.tensor(w, dtype=torch.float64)
        tensors[f'extractor.{i}.bias'] = torch.tensor(b, dtype=torch.float64)
    for t, (w, b) in enumerate(heads):
        tensors[f'classifier.{t}.weight'] = torch.tensor(w, dtype=torch.float64)
        tensors[f'classifier.{t}.bias'] = torch.tensor(b, dtype=torch.float64)
    return ParamStore(tensors, method, len(heads), num_classes)


class TestNetworks(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.rng = np.random.default_rng(0)

    def test_zero_weights_embed_to_zero(self):
        config = TrainConfig(embed_dim=4, num_layers=0, init_scale=0.0)
        params = init_params(config, input_dim=3, num_tasks=1, num_classes=2)
        out = embed(params, [1.0, -2.0, 3.0])
        np.testing.assert_array_equal(out.numpy(), np.zeros(4))

    def test_identity_extractor(self):
        params = dense_store([(np.eye(3), np.zeros(3))], [(np.zeros((2, 3)), np.zeros(2))])
        x = np.array([0.5, -1.5, 2.0])
        np.testing.assert_array_equal(embed(params, x).numpy(), x)

    def test_embed_matches_dense_oracle(self):
        w0, b0 = self.rng.normal(size=(4, 3)), self.rng.normal(size=4)
        w1, b1 = self.rng.normal(size=(4, 4)), self.rng.normal(size=4)
        w2, b2 = self.rng.normal(size=(2, 4)), self.rng.normal(size=2)
        params = dense_store([(w0, b0), (w1, b1), (w2, b2)], [(np.zeros((2, 2)), np.zeros(2))])
        x = self.rng.normal(size=3)
        expected = w2 @ relu(w1 @ relu(w0 @ x + b0) + b1) + b2
        np.testing.assert_allclose(embed(params, x).numpy(), expected, rtol=0, atol=1e-12)

        batch = self.rng.normal(size=(5, 3))
        rows = np.stack([w2 @ relu(w1 @ relu(w0 @ row + b0) + b1) + b2 for row in batch])
        np.testing.assert_allclose(embed(params, batch).numpy(), rows, rtol=0, atol=1e-12)

    def test_embed_dimension_mismatch(self):
        params = dense_store([(np.eye(3), np.zeros(3))], [(np.zeros((2, 3)), np.zeros(2))])
        with self.assertRaises(ShapeError):
            embed(params, [1.0, 2.0])

    def test_zero_classifier_gives_uniform(self):
        params = dense_store([(np.eye(2), np.zeros(2))], [(np.zeros((4, 2)), np.zeros(4))], num_classes=4)
        logits = classify(params, 0, [1.0, 2.0])
        probs = torch.softmax(logits, dim=0).numpy()
        np.testing.assert_allclose(probs, np.full(4, 0.25), atol=1e-15)

    def test_opposite_rows_antisymmetric(self):
        w = np.array([[1.0, -2.0], [-1.0, 2.0]])
        params = dense_store([(np.eye(2), np.zeros(2))], [(w, np.zeros(2))])
        logits = classify(params, 0, [0.3, 0.7]).numpy()
        self.assertAlmostEqual(logits[0], -logits[1], places=15)

    def test_classify_matches_oracle_per_task(self):
        heads = [(self.rng.normal(size=(3, 2)), self.rng.normal(size=3)) for _ in range(2)]
        params = dense_store([(np.eye(2), np.zeros(2))], heads, num_classes=3)
        features = self.rng.normal(size=(4, 2))
        task_ids = np.array([0, 1, 1, 0])
        logits = classify(params, task_ids, features).numpy()
        for i, t in enumerate(task_ids):
            w, b = heads[t]
            np.testing.assert_allclose(logits[i], w @ features[i] + b, rtol=0, atol=1e-12)

    def test_classify_linear_without_bias(self):
        heads = [(self.rng.normal(size=(3, 2)), np.zeros(3))]
        params = dense_store([(np.eye(2), np.zeros(2))], heads, num_classes=3)
        u, v = self.rng.normal(size=2), self.rng.normal(size=2)
        lhs = classify(params, 0, 2.0 * u - 0.5 * v).numpy()
        rhs = 2.0 * classify(params, 0, u).numpy() - 0.5 * classify(params, 0, v).numpy()
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_classify_errors(self):
        params = dense_store([(np.eye(2), np.zeros(2))], [(np.zeros((2, 2)), np.zeros(2))])
        with self.assertRaises(ShapeError):
            classify(params, 1, [1.0, 2.0])
        with self.assertRaises(ShapeError):
            classify(params, 0, [1.0, 2.0, 3.0])

    def test_shared_head_ignores_task_id(self):
        config = TrainConfig(embed_dim=2, num_layers=1, seed=3)
        params = init_params(config, input_dim=3, num_tasks=3, num_classes=4)
        h = self.rng.normal(size=2)
        w = params['classifier.shared.weight'].numpy()
        b = params['classifier.shared.bias'].numpy()
        for t in range(3):
            np.testing.assert_allclose(classify(params, t, h).numpy(), w @ h + b, rtol=0, atol=1e-14)

    def test_stl_routes_rows_per_task(self):
        config = TrainConfig(embed_dim=2, method='stl', seed=1)
        params = init_params(config, input_dim=3, num_tasks=2, num_classes=2)
        x = self.rng.normal(size=(2, 3))
        both = embed(params, x, np.array([0, 1])).detach().numpy()
        first = embed(params, x[0], 0).detach().numpy()
        second = embed(params, x[1], 1).detach().numpy()
        np.testing.assert_allclose(both[0], first, atol=1e-14)
        np.testing.assert_allclose(both[1], second, atol=1e-14)
        with self.assertRaises(ShapeError):
            embed(params, x)


if __name__ == '__main__':
    # Create a test suite
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()
    suite.addTests(loader.loadTestsFromTestCase(TestParamStore))
    suite.addTests(loader.loadTestsFromTestCase(TestNetworks))

    # Run the tests
    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)

    # Exit with error code if tests failed
    sys.exit(not result.wasSuccessful())
