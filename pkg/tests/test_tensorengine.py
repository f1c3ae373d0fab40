import os
import tempfile
import unittest
from collections import OrderedDict

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from arionet import tensorengine as te
from arionet.errors import (CheckpointMismatchError, ShapeError,
                            TruncatedFileError)
from arionet.tensorengine import OptimState, Tensor
from tests.gradcheck import assert_gradients


class TestOps(unittest.TestCase):

    def test_softmax_uniform(self):
        assert_allclose(te.softmax(Tensor([0.0, 0.0, 0.0])).data,
                        [1 / 3, 1 / 3, 1 / 3])

    def test_layer_norm_constant(self):
        assert_allclose(te.layer_norm(Tensor(np.full(6, 4.2))).data, 0.0)

    def test_matmul_identity(self):
        x = np.random.default_rng(0).normal(size=(3, 4))
        assert_array_equal((Tensor(np.eye(3)) @ Tensor(x)).data, x)

    def test_matmul_shape_error_names_shapes(self):
        with self.assertRaisesRegex(ShapeError, r'\(2, 3\).*\(2, 3\)'):
            te.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_add_shape_error(self):
        with self.assertRaises(ShapeError):
            Tensor(np.ones(3)) + Tensor(np.ones(4))

    def test_l2_normalize(self):
        out = te.l2_normalize(Tensor([[3.0, 4.0], [0.0, 0.0]])).data
        assert_allclose(out, [[0.6, 0.8], [0.0, 0.0]])

    def test_dropout_identity_outside_training(self):
        x = Tensor(np.ones((4, 4)))
        self.assertIs(te.dropout(x, 0.5, training=False), x)
        kept = te.dropout(x, 0.5, np.random.default_rng(1)).data
        self.assertTrue(set(np.unique(kept)) <= {0.0, 2.0})


class TestBackward(unittest.TestCase):

    def test_sum_gives_ones(self):
        w = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        w.sum().backward()
        assert_array_equal(w.grad, np.ones((2, 3)))

    def test_half_square_norm(self):
        w = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
        ((w * w).sum() * 0.5).backward()
        assert_allclose(w.grad, w.data)

    def test_non_scalar_loss(self):
        w = Tensor(np.ones(3), requires_grad=True)
        with self.assertRaises(ShapeError):
            (w * 2.0).backward()

    def test_shared_node_accumulates(self):
        w = Tensor(np.array([2.0]), requires_grad=True)
        y = w * w
        (y + y).sum().backward()
        assert_allclose(w.grad, [8.0])

    def test_attention_like_graph(self):
        rng = np.random.default_rng(2)

        def fn(x, wq, wk, gamma, beta):
            q = x @ wq
            k = x @ wk
            att = te.softmax(q @ te.swap_last(k) * 0.5)
            h = te.layer_norm(att @ x + x, gamma, beta)
            return te.relu(h).mean()

        assert_gradients(self, fn, rng.normal(size=(5, 4)),
                         rng.normal(size=(4, 4)), rng.normal(size=(4, 4)),
                         rng.normal(size=4) + 1.0, rng.normal(size=4))

    def test_batched_matmul_with_shared_weight(self):
        rng = np.random.default_rng(3)

        def fn(x, w):
            return (te.exp(x @ w * 0.1)).sum()

        assert_gradients(self, fn, rng.normal(size=(2, 3, 4)),
                         rng.normal(size=(4, 2)))

    def test_shape_ops(self):
        rng = np.random.default_rng(4)

        def fn(a, b):
            joined = te.concat([a, b], axis=1)
            picked = joined[:, [0, 2, 3]].reshape(3, 2)
            unit = te.l2_normalize(te.transpose(picked))
            return te.log_(te.sum_(unit * unit, axis=0) + 1.0).mean()

        assert_gradients(self, fn, rng.normal(size=(2, 2)),
                         rng.normal(size=(2, 3)))

    def test_no_grad_for_constants(self):
        w = Tensor(np.ones(2), requires_grad=True)
        c = Tensor(np.ones(2))
        (w * c).sum().backward()
        self.assertIsNone(c.grad)


class TestOptimizer(unittest.TestCase):

    def test_zero_gradient_leaves_params(self):
        p = te.parameter(np.array([1.0, 2.0]), 'p')
        p.grad = np.zeros(2)
        te.adam_step({'p': p}, OptimState(lr=0.1))
        assert_array_equal(p.data, [1.0, 2.0])

    def test_descends_square(self):
        w = te.parameter(np.array([1.0]), 'w')
        (w * w).sum().backward()
        te.adam_step({'w': w}, OptimState(lr=0.1))
        self.assertLess(w.data[0], 1.0)

    def test_deterministic_trajectory(self):
        def run():
            rng = np.random.default_rng(9)
            w = te.parameter(rng.normal(size=3), 'w')
            state = OptimState(lr=0.05)
            for _ in range(5):
                te.zero_grads({'w': w})
                (w * w * w).sum().backward()
                te.adam_step({'w': w}, state)
            return w.data
        assert_array_equal(run(), run())

    def test_lr_decay(self):
        state = OptimState(lr=1e-3, gamma=0.95)
        te.lr_decay(state)
        self.assertAlmostEqual(state.lr, 9.5e-4)
        for _ in range(4):
            te.lr_decay(state)
        self.assertAlmostEqual(state.lr, 1e-3 * 0.95 ** 5)
        flat = OptimState(lr=1e-3, gamma=1.0)
        te.lr_decay(flat)
        self.assertEqual(flat.lr, 1e-3)


class TestCheckpoint(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.params = OrderedDict(
            a=te.parameter(np.arange(6, dtype=np.float32).reshape(2, 3), 'a'),
            b=te.parameter(np.array([0.5], dtype=np.float32), 'b'))

    def test_save_load(self):
        path = os.path.join(self.tmp.name, 'm.ck')
        te.save_checkpoint(self.params, path)
        arrays = te.load_checkpoint(path)
        self.assertEqual(list(arrays), ['a', 'b'])
        assert_array_equal(arrays['a'], self.params['a'].data)

    def test_truncated(self):
        data = te.encode_checkpoint(self.params)
        with self.assertRaises(TruncatedFileError):
            te.decode_checkpoint(data[:-2])

    def test_strict_load_names_unknown(self):
        arrays = te.decode_checkpoint(te.encode_checkpoint(self.params))
        arrays['ghost'] = np.zeros(1, dtype=np.float32)
        with self.assertRaisesRegex(CheckpointMismatchError, 'ghost'):
            te.load_into(self.params, arrays)

    def test_shape_mismatch(self):
        arrays = te.decode_checkpoint(te.encode_checkpoint(self.params))
        arrays['b'] = np.zeros(2, dtype=np.float32)
        with self.assertRaises(CheckpointMismatchError):
            te.load_into(self.params, arrays, strict=False)


if __name__ == '__main__':
    unittest.main()
