"""Interaction and behaviour-modelling layers shared by the backbones."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..nn import MLP, Module, Tensor, as_tensor, broadcast_to, concat, masked_softmax, xavier_uniform


def fm_second_order(field_embeddings):
    """Sum of pairwise inner products over fields, (..., F, d) -> (...).

    Uses 0.5 * sum_k[(sum_i v_ik)^2 - sum_i v_ik^2].
    """
    v = as_tensor(field_embeddings)
    if v.ndim < 2 or v.shape[-2] < 2:
        raise ValueError(f"FM needs at least 2 fields, got shape {v.shape}")
    s = v.sum(axis=-2)
    sq = (v * v).sum(axis=-2)
    return ((s * s - sq).sum(axis=-1)) * 0.5


def dcnv2_cross_layer(x0, x_l, W, b):
    """x0 * (W x_l + b) + x_l with a full (D, D) weight matrix."""
    x0, x_l, W = as_tensor(x0), as_tensor(x_l), as_tensor(W)
    D = x0.shape[-1]
    if x_l.shape != x0.shape or W.shape != (D, D) or as_tensor(b).shape[-1] != D:
        raise ShapeError(
            f"cross layer shapes: x0 {x0.shape}, x_l {x_l.shape}, W {W.shape}, b {as_tensor(b).shape}")
    return x0 * (x_l @ W.T + b) + x_l


class CrossNetwork(Module):
    def __init__(self, dim, n_layers, rng):
        self.dim = dim
        self.W = [Tensor(xavier_uniform(rng, dim, dim), requires_grad=True) for _ in range(n_layers)]
        self.b = [Tensor(np.zeros(dim), requires_grad=True) for _ in range(n_layers)]

    def forward(self, x0):
        x = x0
        for W, b in zip(self.W, self.b):
            x = dcnv2_cross_layer(x0, x, W, b)
        return x


class AttentionUnit(Module):
    """Scores history items from [h, t, h - t, h * t]."""

    def __init__(self, d, hidden, rng):
        self.mlp = MLP([4 * d, *hidden, 1], rng)

    def forward(self, feats):
        return self.mlp(feats)


def din_attention(target, history, mask, unit):
    """Target-aware pooling of history embeddings.

    target (B, d), history (B, L, d), mask (B, L) of valid positions.
    Scores are softmax-normalized over valid positions; rows with an empty
    history pool to zeros.
    """
    target, history = as_tensor(target), as_tensor(history)
    if history.ndim != 3 or target.ndim != 2 or history.shape[0] != target.shape[0] \
            or history.shape[2] != target.shape[1]:
        raise ShapeError(f"din_attention: target {target.shape} vs history {history.shape}")
    B, L, d = history.shape
    if L == 0:
        return Tensor(np.zeros((B, d)))
    mask = np.asarray(mask, dtype=bool)
    t = broadcast_to(target.reshape(B, 1, d), (B, L, d))
    feats = concat([history, t, history - t, history * t], axis=-1)
    scores = as_tensor(unit(feats)).reshape(B, L)
    w = masked_softmax(scores, mask, axis=-1)
    return (w.reshape(B, L, 1) * history).sum(axis=1)
