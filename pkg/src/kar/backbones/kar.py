"""Backbone + knowledge wiring: in-line adaptor, or prestored augmented vectors."""

from __future__ import annotations

import numpy as np

from ..errors import DataError
from ..nn import Module, Tensor


class KARModel(Module):
    """Backbone fed by an adaptor applied to prestored knowledge representations.

    ``user_reps`` / ``item_reps`` are (n_users, m) / (n_items, m) arrays
    indexed by a batch's ``user_keys`` / ``item_keys``. The adaptor and
    backbone train jointly.
    """

    def __init__(self, backbone, adaptor=None, user_reps=None, item_reps=None):
        self.backbone = backbone
        self.adaptor = adaptor
        self.user_reps = None if user_reps is None else np.asarray(user_reps, dtype=np.float64)
        self.item_reps = None if item_reps is None else np.asarray(item_reps, dtype=np.float64)
        roles = backbone.cfg.roles
        if roles and adaptor is None:
            raise DataError(f"mode {backbone.cfg.mode!r} needs an adaptor")
        if "reasoning" in roles and self.user_reps is None:
            raise DataError("reasoning augmentation needs user knowledge representations")
        if "fact" in roles and self.item_reps is None:
            raise DataError("fact augmentation needs item knowledge representations")

    def augment(self, batch):
        roles = self.backbone.cfg.roles
        aug = {}
        if "reasoning" in roles:
            aug["reasoning"] = self.adaptor.forward_kind(
                Tensor(self.user_reps[batch.user_keys]), "preference")
        if "fact" in roles:
            aug["fact"] = self.adaptor.forward_kind(
                Tensor(self.item_reps[batch.item_keys]), "item_factual")
        return aug

    def forward(self, batch):
        return self.backbone(batch, self.augment(batch))


class PrestoredKAR(Module):
    """Backbone reading augmented vectors computed ahead of time (adaptor detached)."""

    def __init__(self, backbone, user_aug=None, item_aug=None):
        self.backbone = backbone
        self.user_aug = None if user_aug is None else np.asarray(user_aug, dtype=np.float64)
        self.item_aug = None if item_aug is None else np.asarray(item_aug, dtype=np.float64)

    def augment(self, batch):
        roles = self.backbone.cfg.roles
        aug = {}
        if "reasoning" in roles:
            aug["reasoning"] = Tensor(self.user_aug[batch.user_keys])
        if "fact" in roles:
            aug["fact"] = Tensor(self.item_aug[batch.item_keys])
        return aug

    def forward(self, batch):
        return self.backbone(batch, self.augment(batch))
