"""Scaled-cosine logits over adapted features and the symmetric contrastive
cross-entropy, with the analytic gradient back to the adapter parameters.

The batch pairs each image feature with the text feature of its own class;
row i of the B-by-B logit matrix should peak at column i, so the targets of
both cross-entropy directions are the batch indices 0..B-1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adapter import AdapterParams, forward
from .errors import NumericError, ParameterError, ShapeError
from .numerics import NORM_EPS, as_matrix, rowwise_l2_normalize, rowwise_softmax

# Matches the logit scale of the pretrained contrastive encoders the frozen
# features come from. Configurable, never trained.
DEFAULT_SCALE = 100.0


@dataclass(frozen=True)
class LogitPair:
    """Image->text logits and their exact transpose, plus the scale used."""

    image_logits: np.ndarray  # (B, B)
    text_logits: np.ndarray   # (B, B), transpose of image_logits
    scale: float


@dataclass(frozen=True)
class LossGrad:
    loss: float
    grad: np.ndarray  # d(loss)/d(params) in canonical flat order


def compute_logits(adapted, text_batch, s: float = DEFAULT_SCALE) -> LogitPair:
    """Scaled pairwise cosines between adapted image rows and text rows."""
    a = as_matrix(adapted, "adapted features")
    t = as_matrix(text_batch, "text features")
    if a.shape != t.shape:
        raise ShapeError(f"adapted {a.shape} and text {t.shape} shapes differ")
    if s <= 0:
        raise ParameterError(f"scale must be positive, got {s}")
    image_logits = s * (rowwise_l2_normalize(a) @ rowwise_l2_normalize(t).T)
    return LogitPair(image_logits=image_logits, text_logits=image_logits.T, scale=s)


def _diag_cross_entropy(logits: np.ndarray) -> float:
    """Mean cross-entropy of each row against target index = row number."""
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    return float(np.mean(lse - np.diagonal(z)))


def symmetric_ce_loss(lp: LogitPair) -> float:
    """Average of the image->text and text->image cross-entropies."""
    li = lp.image_logits
    if li.ndim != 2 or li.shape[0] != li.shape[1]:
        raise ShapeError(f"logits must be square, got shape {li.shape}")
    return 0.5 * (_diag_cross_entropy(li) + _diag_cross_entropy(lp.text_logits))


def loss_and_grad(params: AdapterParams, features, text_batch,
                  s: float = DEFAULT_SCALE) -> LossGrad:
    """Symmetric contrastive loss and its exact gradient w.r.t. the adapter.

    The chain runs attention -> elementwise product -> row normalization ->
    scaled cosine logits -> both cross-entropy directions; every stage is
    differentiated by hand below. Verified against central finite
    differences in the test suite.
    """
    x = as_matrix(features, "features")
    t = as_matrix(text_batch, "text features")
    d = params.feature_dim
    if x.shape[1] != d:
        raise ShapeError(f"features have {x.shape[1]} columns, adapter expects {d}")
    if t.shape != x.shape:
        raise ShapeError(f"text batch {t.shape} must match features {x.shape}")
    if s <= 0:
        raise ParameterError(f"scale must be positive, got {s}")
    n_batch = x.shape[0]

    fwd = forward(params, x)
    u = fwd.adapted
    u_norms = np.linalg.norm(u, axis=1, keepdims=True)
    u_clamped = np.maximum(u_norms, NORM_EPS)
    u_hat = u / u_clamped
    t_hat = rowwise_l2_normalize(t)

    logits = s * (u_hat @ t_hat.T)
    loss = 0.5 * (_diag_cross_entropy(logits) + _diag_cross_entropy(logits.T))

    # d(loss)/d(logits): softmax minus one-hot for each direction, averaged.
    p = rowwise_softmax(logits)
    q = rowwise_softmax(logits.T)
    eye = np.eye(n_batch)
    g_logits = 0.5 * ((p - eye) + (q - eye).T) / n_batch

    # logits = s * u_hat @ t_hat.T
    g_u_hat = s * (g_logits @ t_hat)

    # u_hat = u / max(||u||, eps); rows under the clamp are plain u / eps
    dot = np.sum(g_u_hat * u_hat, axis=1, keepdims=True)
    g_u = np.where(
        u_norms >= NORM_EPS,
        (g_u_hat - dot * u_hat) / u_clamped,
        g_u_hat / NORM_EPS,
    )

    # u = attention * x
    g_att = g_u * x

    # attention = softmax(z2) rowwise
    att = fwd.attention
    g_z2 = att * (g_att - np.sum(g_att * att, axis=1, keepdims=True))

    # z2 = hidden @ w2.T + b2
    g_w2 = g_z2.T @ fwd.hidden
    g_b2 = g_z2.sum(axis=0)
    g_hidden = g_z2 @ params.w2

    # hidden = tanh(z1)
    g_z1 = g_hidden * (1.0 - fwd.hidden ** 2)

    # z1 = x @ w1.T + b1
    g_w1 = g_z1.T @ x
    g_b1 = g_z1.sum(axis=0)

    grad = np.concatenate([g_w1.ravel(), g_b1, g_w2.ravel(), g_b2])
    if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise NumericError("loss or gradient became non-finite")
    return LossGrad(loss=float(loss), grad=grad)
