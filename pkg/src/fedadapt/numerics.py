"""Dense float64 matrix kernels shared by the rest of the pipeline.

Everything here is a pure function of its inputs, so concurrent callers are
safe. Training math stays in 64-bit floats throughout; only the feature-file
format narrows to 32-bit.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NumericError, ShapeError

# Guard used when normalizing rows; keeps exact-zero rows at zero.
NORM_EPS = 1e-12


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Validate ``values`` as a finite 2-D float64 array and return it."""
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError(f"{name} contains non-finite entries")
    return m


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Validate ``values`` as a finite 1-D float64 array and return it."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NumericError(f"{name} contains non-finite entries")
    return v


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def rowwise_softmax(m) -> np.ndarray:
    """Softmax over each row, stabilized by subtracting the row maximum."""
    m = as_matrix(m)
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def rowwise_l2_normalize(m, eps: float = NORM_EPS) -> np.ndarray:
    """Divide each row by max(||row||, eps); zero rows pass through unchanged."""
    m = as_matrix(m)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return m / np.maximum(norms, eps)


def finite_diff_grad(f: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function over a flat vector.

    Used as the independent oracle for every analytic gradient in the
    package; deliberately has nothing in common with the code it checks.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"expected a flat vector, got shape {x.shape}")
    grad = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        hi = float(f(x + step))
        lo = float(f(x - step))
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NumericError(f"non-finite evaluation while probing coordinate {i}")
        grad[i] = (hi - lo) / (2.0 * h)
    return grad
