import math

import numpy as np
import pytest

from icnn import (AdamState, adam_step, cross_entropy_with_grad,
                  finite_difference_gradcheck, softmax)


class TestSoftmax:
    def test_symmetry(self):
        np.testing.assert_allclose(softmax(np.array([1.0, 1.0])), [0.5, 0.5])

    def test_direct_evaluation(self):
        # exp(0) = 1 and exp(ln 3) = 3, so the split is 1/4 vs 3/4
        out = softmax(np.array([0.0, math.log(3.0)]))
        np.testing.assert_allclose(out, [0.25, 0.75], atol=1e-12)

    def test_large_scores_do_not_overflow(self):
        out = softmax(np.array([1000.0, 1000.0]))
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, [0.5, 0.5])

    def test_sums_to_one_and_shift_invariant(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(1, 40))
            s = rng.normal(0, 10, n)
            p32 = softmax(s.astype(np.float32))
            assert abs(p32.sum() - 1.0) < 1e-6
            assert np.all(p32 > 0) and np.all(p32 <= 1.0)
            shifted = softmax(s + rng.normal(0, 50))
            np.testing.assert_allclose(softmax(s), shifted, atol=1e-6)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            softmax(np.array([]))
        with pytest.raises(ValueError):
            softmax(np.array([1.0, np.nan]))
        with pytest.raises(ValueError):
            softmax(np.array([np.inf, 0.0]))


class TestCrossEntropy:
    def test_uniform_two_way(self):
        loss, grad = cross_entropy_with_grad(np.array([0.0, 0.0]), 0)
        assert abs(loss - math.log(2.0)) < 1e-12
        np.testing.assert_allclose(grad, [-0.5, 0.5], atol=1e-12)

    def test_confident_correct(self):
        loss, _ = cross_entropy_with_grad(np.array([30.0, 0.0]), 0)
        assert 0.0 <= loss < 1e-12

    def test_gold_out_of_range(self):
        with pytest.raises(IndexError):
            cross_entropy_with_grad(np.array([0.0, 1.0]), 2)
        with pytest.raises(IndexError):
            cross_entropy_with_grad(np.array([0.0, 1.0]), -1)

    def test_loss_nonnegative(self):
        rng = np.random.default_rng(1)
        for _ in range(300):
            s = rng.normal(0, 5, int(rng.integers(2, 10)))
            loss, _ = cross_entropy_with_grad(s, int(rng.integers(0, len(s))))
            assert loss >= 0.0

    def test_grad_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            s0 = rng.normal(0, 3, 5)
            gold = int(rng.integers(0, 5))

            def loss_and_grad(params):
                loss, grad = cross_entropy_with_grad(params[0], gold)
                return loss, [grad]

            assert finite_difference_gradcheck(loss_and_grad, [s0]) <= 1e-6


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        p = np.array([1.5, -2.0])
        state = AdamState.for_param(p)
        out, state = adam_step(p, np.zeros_like(p), state)
        np.testing.assert_array_equal(out, p)
        out, state = adam_step(out, np.zeros_like(p), state)
        np.testing.assert_array_equal(out, p)

    def test_first_step_bias_correction(self):
        # m_hat = v_hat = 1 on the first unit-gradient step, so the move is
        # -lr / (1 + eps)
        p = np.array([0.0])
        state = AdamState.for_param(p, lr=1e-3)
        out, state = adam_step(p, np.array([1.0]), state)
        assert abs(out[0] + 1e-3) < 1e-10
        assert state.step == 1

    def test_descends_quadratic(self):
        x = np.array([1.0])
        state = AdamState.for_param(x, lr=1e-2)
        f = lambda v: float(v[0] ** 2)
        start = f(x)
        for _ in range(2):
            x, state = adam_step(x, 2.0 * x, state)
        assert f(x) < start

    def test_shape_mismatch(self):
        p = np.zeros(3)
        state = AdamState.for_param(p)
        with pytest.raises(ValueError):
            adam_step(p, np.zeros(4), state)

    def test_counter_and_finiteness(self):
        rng = np.random.default_rng(3)
        p = rng.normal(0, 1, (4, 5)).astype(np.float32)
        state = AdamState.for_param(p)
        for expected_step in range(1, 30):
            g = rng.normal(0, 100, p.shape).astype(np.float32)
            p, state = adam_step(p, g, state)
            assert state.step == expected_step
            assert np.all(np.isfinite(p))

    def test_float32_stays_float32(self):
        p = np.zeros(2, dtype=np.float32)
        out, _ = adam_step(p, np.ones(2, dtype=np.float32), AdamState.for_param(p))
        assert out.dtype == np.float32


class TestGradcheck:
    def test_polynomial(self):
        def loss_and_grad(params):
            (x,) = params
            return float((x ** 2).sum()), [2.0 * x]

        assert finite_difference_gradcheck(loss_and_grad, [np.array([3.0])]) <= 1e-6

    def test_detects_corrupted_gradient(self):
        def corrupted(params):
            (x,) = params
            return float((x ** 2).sum()), [2.2 * x]  # 10% too big

        assert finite_difference_gradcheck(corrupted, [np.array([3.0])]) > 1e-2
