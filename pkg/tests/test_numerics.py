import math

import numpy as np
import pytest

from fedadapt import matmul, rowwise_l2_normalize, rowwise_softmax, finite_diff_grad
from fedadapt.errors import NumericError, ShapeError


def naive_matmul(a, b):
    """Triple-loop reference, deliberately independent of numpy's dot."""
    n, k = a.shape
    k2, m = b.shape
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            for kk in range(k):
                out[i, j] += a[i, kk] * b[kk, j]
    return out


class TestMatmul:
    def test_identity(self):
        x = np.arange(6.0).reshape(2, 3)
        assert np.array_equal(matmul(np.eye(2), x), x)

    def test_hand_product(self):
        out = matmul([[1.0, 2.0], [3.0, 4.0]], [[5.0], [6.0]])
        assert np.array_equal(out, [[17.0], [39.0]])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(np.zeros((2, 3)), np.zeros((2, 2)))

    def test_against_naive_reference(self):
        rng = np.random.default_rng(42)
        for _ in range(5):
            a = rng.standard_normal((7, 5))
            b = rng.standard_normal((5, 3))
            assert np.max(np.abs(matmul(a, b) - naive_matmul(a, b))) < 1e-12

    def test_rejects_non_finite(self):
        with pytest.raises(NumericError):
            matmul([[np.nan, 1.0]], [[1.0], [1.0]])


class TestRowwiseSoftmax:
    def test_symmetric_row(self):
        out = rowwise_softmax([[0.0, 0.0]])
        assert np.allclose(out, [[0.5, 0.5]], atol=1e-15)

    def test_closed_form(self):
        out = rowwise_softmax([[0.0, math.log(3.0)]])
        assert np.allclose(out, [[0.25, 0.75]], atol=1e-12)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(7)
        m = rng.standard_normal((1, 5)) * 10
        out = rowwise_softmax(m)
        assert abs(out.sum() - 1.0) < 1e-12
        assert np.all(out > 0) and np.all(out < 1)

    def test_shift_invariance(self):
        rng = np.random.default_rng(8)
        m = rng.standard_normal((4, 6))
        assert np.max(np.abs(rowwise_softmax(m + 3.7) - rowwise_softmax(m))) < 1e-12

    def test_survives_large_logits(self):
        # scale-100 cosine logits must not overflow the exponential
        out = rowwise_softmax([[100.0, -100.0, 50.0]])
        assert np.all(np.isfinite(out))
        assert abs(out.sum() - 1.0) < 1e-12


class TestRowwiseL2Normalize:
    def test_three_four_five(self):
        assert np.allclose(rowwise_l2_normalize([[3.0, 4.0]]), [[0.6, 0.8]], atol=1e-15)

    def test_idempotent(self):
        rng = np.random.default_rng(9)
        m = rng.standard_normal((5, 4))
        once = rowwise_l2_normalize(m)
        assert np.max(np.abs(rowwise_l2_normalize(once) - once)) < 1e-12

    def test_zero_row_passes_through(self):
        out = rowwise_l2_normalize([[0.0, 0.0, 0.0]])
        assert np.array_equal(out, [[0.0, 0.0, 0.0]])


class TestFiniteDiffGrad:
    def test_quadratic(self):
        g = finite_diff_grad(lambda v: float(v[0] ** 2), np.array([3.0]), 1e-5)
        assert abs(g[0] - 6.0) < 1e-6

    def test_constant(self):
        g = finite_diff_grad(lambda v: 1.25, np.array([1.0, -2.0, 0.5]), 1e-5)
        assert np.array_equal(g, np.zeros(3))

    def test_multivariate(self):
        f = lambda v: float(v[0] * v[1] + math.sin(v[2]))
        x = np.array([2.0, -1.0, 0.3])
        g = finite_diff_grad(f, x, 1e-6)
        assert np.allclose(g, [-1.0, 2.0, math.cos(0.3)], atol=1e-7)

    def test_non_finite_probe(self):
        with pytest.raises(NumericError):
            finite_diff_grad(lambda v: float("nan"), np.array([1.0]), 1e-5)
