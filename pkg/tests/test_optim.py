import math

import numpy as np
import pytest

from fedadapt import AdamState, adam_step, apply_prox, init_adam
from fedadapt.errors import ParameterError, ShapeError


class TestAdamStep:
    def test_zero_grad_is_fixed_point(self):
        state = init_adam(3, lr=0.1)
        params = np.array([1.0, -2.0, 0.5])
        new_state, new_params = adam_step(state, params, np.zeros(3))
        assert new_state.t == 1
        assert np.array_equal(new_params, params)

    def test_first_step_is_signed_lr(self):
        state = init_adam(2, lr=0.01)
        _, new_params = adam_step(state, np.zeros(2), np.array([3.0, -7.0]))
        assert np.allclose(new_params, [-0.01, 0.01], atol=1e-9)

    def test_three_step_trajectory_matches_scalar_oracle(self):
        # minimize f(x) = x^2 (grad = 2x) from x = 1
        lr = 0.1
        state = init_adam(1, lr=lr)
        params = np.array([1.0])
        seen = []
        for _ in range(3):
            state, params = adam_step(state, params, 2.0 * params)
            seen.append(float(params[0]))

        # hand-rolled scalar walk, independent of the vector implementation
        x, m, v = 1.0, 0.0, 0.0
        expected = []
        for t in range(1, 4):
            g = 2.0 * x
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            x = x - lr * (m / (1 - 0.9 ** t)) / (math.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
            expected.append(x)
        assert np.allclose(seen, expected, atol=1e-12)

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        params = rng.standard_normal(5)
        grad = rng.standard_normal(5)
        s1, p1 = adam_step(init_adam(5), params, grad)
        s2, p2 = adam_step(init_adam(5), params, grad)
        assert np.array_equal(p1, p2)
        assert np.array_equal(s1.m, s2.m) and np.array_equal(s1.v, s2.v)

    def test_forever_zero_grad_keeps_params(self):
        state = init_adam(2, lr=0.5)
        params = np.array([2.0, -3.0])
        for _ in range(10):
            state, params = adam_step(state, params, np.zeros(2))
        assert np.array_equal(params, [2.0, -3.0])

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            adam_step(init_adam(3), np.zeros(3), np.zeros(4))


class TestApplyProx:
    def test_mu_zero_is_bitwise_identity(self):
        rng = np.random.default_rng(1)
        grad = rng.standard_normal(6)
        out = apply_prox(grad, rng.standard_normal(6), rng.standard_normal(6), 0.0)
        assert np.array_equal(out, grad)

    def test_hand_instance(self):
        out = apply_prox(np.array([1.0, 1.0]), np.array([2.0, 0.0]),
                         np.array([1.0, 1.0]), 0.1)
        assert np.allclose(out, [1.1, 0.9], atol=1e-15)

    def test_at_anchor_any_mu(self):
        grad = np.array([0.3, -0.2])
        params = np.array([1.0, 2.0])
        out = apply_prox(grad, params, params, 5.0)
        assert np.allclose(out, grad, atol=1e-15)

    def test_negative_mu_rejected(self):
        with pytest.raises(ParameterError):
            apply_prox(np.zeros(2), np.zeros(2), np.zeros(2), -0.1)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            apply_prox(np.zeros(2), np.zeros(3), np.zeros(2), 0.1)


def test_adam_state_defaults():
    state = init_adam(4)
    assert state.lr == 5e-4
    assert state.beta1 == 0.9
    assert state.beta2 == 0.999
    assert state.eps == 1e-8
    assert state.t == 0
    assert np.all(state.v >= 0)
