"""The attention adapter: a two-layer net (linear, tanh, linear, softmax)
that emits a per-feature attention vector, multiplied elementwise into the
frozen image feature.

Parameters live either as structured :class:`AdapterParams` or as a flat
vector in the canonical order (w1 row-major, b1, w2 row-major, b2). The
aggregation step, checkpoints, and the communication ledger all rely on
that order staying fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError
from .numerics import as_matrix, rowwise_softmax


def parameter_count(d: int) -> int:
    """Trainable scalars in one adapter: two d-by-d maps plus two biases."""
    if d < 1:
        raise ParameterError(f"feature dimension must be >= 1, got {d}")
    return 2 * d * d + 2 * d


def _frozen(a, shape: tuple[int, ...], name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    if arr.shape != shape:
        raise ShapeError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class AdapterParams:
    """Adapter weights; arrays are copied and made read-only on construction."""

    w1: np.ndarray  # (d, d)
    b1: np.ndarray  # (d,)
    w2: np.ndarray  # (d, d)
    b2: np.ndarray  # (d,)

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=np.float64)
        if w1.ndim != 2 or w1.shape[0] != w1.shape[1]:
            raise ShapeError(f"w1 must be square, got shape {w1.shape}")
        d = w1.shape[0]
        object.__setattr__(self, "w1", _frozen(w1, (d, d), "w1"))
        object.__setattr__(self, "b1", _frozen(self.b1, (d,), "b1"))
        object.__setattr__(self, "w2", _frozen(self.w2, (d, d), "w2"))
        object.__setattr__(self, "b2", _frozen(self.b2, (d,), "b2"))

    @property
    def feature_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def n_params(self) -> int:
        return parameter_count(self.feature_dim)


@dataclass(frozen=True)
class AdapterForward:
    """Forward-pass outputs plus the caches the backward pass needs."""

    attention: np.ndarray  # (B, d), each row sums to 1
    adapted: np.ndarray    # (B, d) = attention * inputs, elementwise
    inputs: np.ndarray     # (B, d) the features the pass was run on
    hidden: np.ndarray     # (B, d) tanh output of the first layer


def init_adapter(d: int, rng: np.random.Generator) -> AdapterParams:
    """Fresh adapter: uniform first layer, zeroed second layer.

    With w2 = b2 = 0 the softmax sees all-zero inputs, so the attention is
    exactly uniform (1/d per coordinate). Uniform attention rescales every
    feature coordinate equally, and cosine similarity ignores scale, so a
    freshly initialized adapter predicts exactly like the raw features do.
    """
    if d < 1:
        raise ParameterError(f"feature dimension must be >= 1, got {d}")
    bound = 1.0 / math.sqrt(d)
    w1 = rng.uniform(-bound, bound, size=(d, d))
    return AdapterParams(
        w1=w1,
        b1=np.zeros(d),
        w2=np.zeros((d, d)),
        b2=np.zeros(d),
    )


def forward(params: AdapterParams, features) -> AdapterForward:
    """Run the adapter on a batch of features (one sample per row)."""
    x = as_matrix(features, "features")
    d = params.feature_dim
    if x.shape[1] != d:
        raise ShapeError(f"features have {x.shape[1]} columns, adapter expects {d}")
    hidden = np.tanh(x @ params.w1.T + params.b1)
    attention = rowwise_softmax(hidden @ params.w2.T + params.b2)
    return AdapterForward(
        attention=attention,
        adapted=attention * x,
        inputs=x,
        hidden=hidden,
    )


def flatten(params: AdapterParams) -> np.ndarray:
    """Canonical flat form: w1 row-major, b1, w2 row-major, b2."""
    return np.concatenate(
        [params.w1.ravel(), params.b1, params.w2.ravel(), params.b2]
    )


def unflatten(vec, d: int) -> AdapterParams:
    """Inverse of :func:`flatten`; round trips are exact."""
    v = np.asarray(vec, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"expected a flat vector, got shape {v.shape}")
    expected = parameter_count(d)
    if v.size != expected:
        raise ShapeError(f"flat vector has length {v.size}, expected {expected} for d={d}")
    dd = d * d
    return AdapterParams(
        w1=v[:dd].reshape(d, d),
        b1=v[dd:dd + d],
        w2=v[dd + d:2 * dd + d].reshape(d, d),
        b2=v[2 * dd + d:],
    )
