"""DeepFM, DCNv2 and DIN with optional augmented-vector fields.

Every backbone follows embedding -> feature interaction -> (behaviour
modelling) -> output. Augmented vectors enter as extra field embeddings in
the interaction layer, so an augmented model sees F + k fields, k in {0, 1, 2}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DataError, ShapeError
from ..nn import MLP, Embedding, Linear, Module, Tensor, as_tensor, concat, sigmoid
from .layers import AttentionUnit, CrossNetwork, din_attention, fm_second_order

KINDS = ("deepfm", "dcnv2", "din")
MODES = ("none", "fact", "reasoning", "both")
MODE_ROLES = {"none": (), "fact": ("fact",), "reasoning": ("reasoning",),
              "both": ("reasoning", "fact")}


@dataclass
class BackboneConfig:
    kind: str = "din"
    vocab_sizes: list = field(default_factory=list)
    embed_dim: int = 32
    mlp: tuple = (200, 80)
    cross_layers: int = 3
    attention: tuple = (80, 40)
    mode: str = "none"
    aug_dim: int = 32
    item_field: int = 5
    category_field: int = 6
    rating_vocab: int = 6

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown backbone {self.kind!r}; expected one of {KINDS}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown augmentation mode {self.mode!r}; expected one of {MODES}")
        if self.embed_dim <= 0 or any(s <= 0 for s in self.mlp) or self.aug_dim <= 0:
            raise ConfigError("embedding, MLP and augmented sizes must be positive")
        self.mlp = tuple(self.mlp)
        self.attention = tuple(self.attention)

    @property
    def roles(self):
        return MODE_ROLES[self.mode]


@dataclass
class Batch:
    fields: np.ndarray  # (B, F) int
    history: np.ndarray  # (B, L, 3) int
    hist_mask: np.ndarray  # (B, L) bool
    labels: np.ndarray = None
    user_keys: np.ndarray = None
    item_keys: np.ndarray = None

    def __len__(self):
        return len(self.fields)

    @classmethod
    def from_table(cls, table, idx=None):
        if idx is None:
            idx = slice(None)
        L = table.history.shape[1]
        hist_len = table.hist_len[idx]
        mask = np.arange(L)[None, :] >= (L - hist_len)[:, None]
        return cls(table.fields[idx], table.history[idx], mask, table.labels[idx],
                   table.user_keys[idx], table.item_keys[idx])


class Backbone(Module):
    """Shared embedding plumbing; subclasses implement ``interact``."""

    def __init__(self, cfg: BackboneConfig, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        if not cfg.vocab_sizes:
            raise ConfigError("backbone needs per-field vocabulary sizes")
        self.cfg = cfg
        self.n_fields = len(cfg.vocab_sizes)
        self.offsets = np.concatenate([[0], np.cumsum(cfg.vocab_sizes)[:-1]]).astype(np.int64)
        d = cfg.embed_dim
        self.embedding = Embedding(int(sum(cfg.vocab_sizes)), d, rng)
        self.bridges = []
        if cfg.aug_dim != d:
            self.bridges = [Linear(cfg.aug_dim, d, rng) for _ in cfg.roles]
        self._build(rng)

    @property
    def n_interaction_fields(self):
        return self.n_fields + len(self.cfg.roles)

    def _build(self, rng):
        raise NotImplementedError

    def embed_fields(self, fields):
        fields = np.asarray(fields)
        if fields.ndim != 2 or fields.shape[1] != self.n_fields:
            raise ShapeError(f"expected fields of shape (B, {self.n_fields}), got {fields.shape}")
        return self.embedding(fields + self.offsets)

    def aug_fields(self, aug, batch_size):
        roles = self.cfg.roles
        if not roles:
            return []
        aug = aug or {}
        missing = [r for r in roles if aug.get(r) is None]
        if missing:
            raise DataError(f"mode {self.cfg.mode!r} needs augmented vectors for {missing}")
        out = []
        for i, role in enumerate(roles):
            v = as_tensor(aug[role])
            if v.shape != (batch_size, self.cfg.aug_dim):
                raise ShapeError(f"{role} augmented vectors: expected {(batch_size, self.cfg.aug_dim)}, got {v.shape}")
            if self.bridges:
                v = self.bridges[i](v)
            out.append(v.reshape(batch_size, 1, self.cfg.embed_dim))
        return out

    def interaction_fields(self, batch, aug=None):
        """(B, F + k, d) stack fed to the feature-interaction layer."""
        emb = self.embed_fields(batch.fields)
        extra = self.aug_fields(aug, len(batch))
        return concat([emb, *extra], axis=1) if extra else emb

    def forward(self, batch, aug=None):
        return sigmoid(self.logit(batch, aug))

    def logit(self, batch, aug=None):
        raise NotImplementedError


class DeepFM(Backbone):
    def _build(self, rng):
        cfg = self.cfg
        self.first_order = Embedding(int(sum(cfg.vocab_sizes)), 1, rng, std=0.0)
        self.bias = Tensor(np.zeros(1), requires_grad=True)
        width = self.n_interaction_fields * cfg.embed_dim
        self.dnn = MLP([width, *cfg.mlp, 1], rng)

    def logit(self, batch, aug=None):
        B = len(batch)
        fields = self.interaction_fields(batch, aug)
        linear = self.first_order(np.asarray(batch.fields) + self.offsets).reshape(B, self.n_fields).sum(axis=1)
        fm = fm_second_order(fields)
        deep = self.dnn(fields.reshape(B, -1)).reshape(B)
        return linear + fm + deep + self.bias


class DCNv2(Backbone):
    def _build(self, rng):
        cfg = self.cfg
        width = self.n_interaction_fields * cfg.embed_dim
        self.cross = CrossNetwork(width, cfg.cross_layers, rng)
        self.deep = MLP([width, *cfg.mlp], rng, final_activation="relu")
        self.out = Linear(width + cfg.mlp[-1], 1, rng)

    def logit(self, batch, aug=None):
        B = len(batch)
        x0 = self.interaction_fields(batch, aug).reshape(B, -1)
        h = concat([self.cross(x0), self.deep(x0)], axis=1)
        return self.out(h).reshape(B)


class DIN(Backbone):
    def _build(self, rng):
        cfg = self.cfg
        d = cfg.embed_dim
        self.rating_embedding = Embedding(cfg.rating_vocab, d, rng)
        self.attention = AttentionUnit(d, cfg.attention, rng)
        width = self.n_interaction_fields * d + d
        self.out = MLP([width, *cfg.mlp, 1], rng)

    def embed_history(self, history):
        """Item, category and rating embeddings summed per history entry."""
        history = np.asarray(history)
        cfg = self.cfg
        idx = np.stack([history[..., 0] + self.offsets[cfg.item_field],
                        history[..., 1] + self.offsets[cfg.category_field]], axis=-1)
        e = self.embedding(idx).sum(axis=-2)
        return e + self.rating_embedding(history[..., 2])

    def behaviour(self, batch, field_emb):
        cfg = self.cfg
        target = field_emb[:, cfg.item_field, :] + field_emb[:, cfg.category_field, :]
        hist = self.embed_history(batch.history)
        return din_attention(target, hist, batch.hist_mask, self.attention)

    def logit(self, batch, aug=None):
        B = len(batch)
        fields = self.interaction_fields(batch, aug)
        interest = self.behaviour(batch, fields)
        h = concat([fields.reshape(B, -1), interest], axis=1)
        return self.out(h).reshape(B)


BACKBONES = {"deepfm": DeepFM, "dcnv2": DCNv2, "din": DIN}


def build_backbone(cfg: BackboneConfig, seed=0):
    return BACKBONES[cfg.kind](cfg, np.random.default_rng(seed))


def forward(batch, model, aug=None):
    """Click probability for every row of ``batch``."""
    return model(batch, aug)
