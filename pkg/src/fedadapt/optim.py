"""Adam with bias correction over flat parameter vectors, plus the proximal
gradient term used by the FedProx-style baseline."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ParameterError, ShapeError
from .numerics import as_vector

DEFAULT_LR = 5e-4
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPS = 1e-8


@dataclass(frozen=True)
class AdamState:
    """Per-client optimizer state; updates return a fresh instance."""

    m: np.ndarray
    v: np.ndarray
    t: int
    lr: float = DEFAULT_LR
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    eps: float = DEFAULT_EPS


def init_adam(n_params: int, lr: float = DEFAULT_LR, beta1: float = DEFAULT_BETA1,
              beta2: float = DEFAULT_BETA2, eps: float = DEFAULT_EPS) -> AdamState:
    if n_params < 1:
        raise ParameterError(f"n_params must be >= 1, got {n_params}")
    return AdamState(m=np.zeros(n_params), v=np.zeros(n_params), t=0,
                     lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state: AdamState, params, grad) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected Adam update; returns (new state, new params)."""
    params = as_vector(params, "params")
    grad = as_vector(grad, "grad")
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise ShapeError(
            f"length mismatch: params {params.shape}, grad {grad.shape}, "
            f"state {state.m.shape}"
        )
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, t=t), new_params


def apply_prox(grad, params, global_params, mu: float) -> np.ndarray:
    """Add the proximal pull mu * (params - anchor) to a gradient.

    mu = 0 returns the gradient bitwise-unchanged, which is what makes a
    zero-mu FedProx run indistinguishable from plain federated averaging.
    """
    grad = as_vector(grad, "grad")
    params = as_vector(params, "params")
    anchor = as_vector(global_params, "global_params")
    if params.shape != grad.shape or anchor.shape != grad.shape:
        raise ShapeError(
            f"length mismatch: grad {grad.shape}, params {params.shape}, "
            f"global {anchor.shape}"
        )
    if mu < 0:
        raise ParameterError(f"mu must be >= 0, got {mu}")
    if mu == 0.0:
        return grad
    return grad + mu * (params - anchor)
