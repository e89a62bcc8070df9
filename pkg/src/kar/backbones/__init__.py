from .kar import KARModel, PrestoredKAR
from .layers import AttentionUnit, CrossNetwork, dcnv2_cross_layer, din_attention, fm_second_order
from .models import (
    BACKBONES,
    DIN,
    KINDS,
    MODE_ROLES,
    MODES,
    Backbone,
    BackboneConfig,
    Batch,
    DCNv2,
    DeepFM,
    build_backbone,
    forward,
)

__all__ = [
    "AttentionUnit", "BACKBONES", "Backbone", "BackboneConfig", "Batch", "CrossNetwork",
    "DCNv2", "DIN", "DeepFM", "KARModel", "KINDS", "MODES", "MODE_ROLES", "PrestoredKAR",
    "build_backbone", "dcnv2_cross_layer", "din_attention", "fm_second_order", "forward",
]
