"""Hybrid-expert adaptor: shared plus kind-specific expert MLPs mixed by a
softmax gate per knowledge kind, mapping semantic vectors (dim m) to
augmented vectors (dim q).

Gate weights index the concatenated pool ``[shared..., dedicated...]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .nn import MLP, Linear, Module, Tensor, as_tensor, softmax, stack

VARIANTS = ("mlp", "moe", "hybrid")


@dataclass
class AdaptorConfig:
    m: int = 64
    q: int = 32
    n_shared: int = 2
    n_pref: int = 5
    n_item: int = 5
    hidden: tuple = (128, 32)
    variant: str = "hybrid"

    def resolved_counts(self):
        """Expert counts after applying the variant."""
        if self.variant == "hybrid":
            return self.n_shared, self.n_pref, self.n_item
        if self.variant == "mlp":
            return 1, 0, 0
        if self.variant == "moe":
            return 0, max(self.n_pref, 1), max(self.n_item, 1)
        raise ConfigError(f"unknown adaptor variant {self.variant!r}; expected one of {VARIANTS}")


@dataclass
class AugmentedVector:
    vector: np.ndarray
    role: str  # "reasoning" | "fact"
    entity_id: str = ""


def gate(rep, gating):
    """Softmax weights over experts from an affine gating map."""
    rep = as_tensor(rep)
    if rep.shape[-1] != gating.in_dim:
        raise ShapeError(f"gate input dim {rep.shape[-1]} != gating network input {gating.in_dim}")
    return softmax(gating(rep), axis=-1)


class HybridAdaptor(Module):
    def __init__(self, m, q, n_shared=2, n_pref=5, n_item=5, hidden=(128, 32), rng=None):
        if min(n_shared, n_pref, n_item) < 0:
            raise ConfigError("expert counts must be non-negative")
        if n_shared + n_pref < 1 or n_shared + n_item < 1:
            raise ConfigError("each knowledge kind needs at least one expert")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.m, self.q = m, q
        self.n_shared, self.n_pref, self.n_item = n_shared, n_pref, n_item
        self.hidden = tuple(hidden)
        sizes = [m, *self.hidden, q]
        self.shared = [MLP(sizes, rng) for _ in range(n_shared)]
        self.pref = [MLP(sizes, rng) for _ in range(n_pref)]
        self.item = [MLP(sizes, rng) for _ in range(n_item)]
        # a single-expert pool needs no gate: softmax over one logit is 1
        self.gate_pref = Linear(m, n_shared + n_pref, rng) if n_shared + n_pref > 1 else None
        self.gate_item = Linear(m, n_shared + n_item, rng) if n_shared + n_item > 1 else None

    @classmethod
    def from_config(cls, cfg: AdaptorConfig, rng=None):
        n_s, n_p, n_i = cfg.resolved_counts()
        return cls(cfg.m, cfg.q, n_s, n_p, n_i, cfg.hidden, rng)

    def config(self):
        return {"m": self.m, "q": self.q, "n_shared": self.n_shared, "n_pref": self.n_pref,
                "n_item": self.n_item, "hidden": list(self.hidden)}

    def pool(self, kind):
        if kind in ("preference", "reasoning"):
            return self.shared + self.pref, self.gate_pref
        if kind in ("item_factual", "fact"):
            return self.shared + self.item, self.gate_item
        raise ValueError(f"unknown knowledge kind {kind!r}")

    def gate_weights(self, rep, kind):
        experts, gating = self.pool(kind)
        if gating is None:
            rep = as_tensor(rep)
            return Tensor(np.ones(rep.shape[:-1] + (1,)))
        return gate(rep, gating)

    def forward_kind(self, rep, kind, weights=None):
        """Mix expert outputs for one knowledge kind.

        ``weights`` overrides the gate (shape (..., K)); used to check the
        mixture is linear in the gate output.
        """
        rep = as_tensor(rep)
        if rep.shape[-1] != self.m:
            raise ShapeError(f"adaptor expects input dim {self.m}, got shape {rep.shape}")
        experts, gating = self.pool(kind)
        if weights is None and gating is None:
            return experts[0](rep)
        if weights is None:
            weights = gate(rep, gating)
        weights = as_tensor(weights)
        if weights.shape[-1] != len(experts):
            raise ShapeError(f"{len(experts)} experts but gate weights of shape {weights.shape}")
        outs = stack([e(rep) for e in experts], axis=-2)  # (..., K, q)
        w = weights.reshape(weights.shape + (1,))
        return (w * outs).sum(axis=-2)

    def forward(self, r_p=None, r_i=None):
        aug_p = self.forward_kind(r_p, "preference") if r_p is not None else None
        aug_i = self.forward_kind(r_i, "item_factual") if r_i is not None else None
        return aug_p, aug_i


def adaptor_forward(r_p, r_i, params: HybridAdaptor):
    """(reasoning augmented vector, fact augmented vector) for one or a batch of inputs."""
    return params(r_p, r_i)


def build_adaptor(variant="hybrid", m=64, q=32, n_shared=2, n_pref=5, n_item=5,
                  hidden=(128, 32), seed=0):
    cfg = AdaptorConfig(m, q, n_shared, n_pref, n_item, tuple(hidden), variant)
    return HybridAdaptor.from_config(cfg, np.random.default_rng(seed))


def adaptor_variant_forward(rep, adaptor: HybridAdaptor, kind="preference"):
    """Forward one kind through an adaptor built by ``build_adaptor``.

    The variant is baked into the expert counts: mlp is one shared expert
    used for both kinds, moe has dedicated pools only, hybrid mixes both.
    """
    return adaptor.forward_kind(rep, kind)


__all__ = [
    "AdaptorConfig", "AugmentedVector", "HybridAdaptor", "VARIANTS", "adaptor_forward",
    "adaptor_variant_forward", "build_adaptor", "gate",
]
