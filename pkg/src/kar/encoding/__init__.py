from ..errors import CacheError
from .cache import (
    CacheMissError,
    RepresentationCache,
    VectorRecord,
    expected_file_size,
    kind_code,
    write_cache,
)
from .encoders import (
    AGGREGATIONS,
    EncodeError,
    HashTokenEncoder,
    KnowledgeRepresentation,
    PrecomputedEncoder,
    aggregate,
    encode_tokens,
    represent,
    wavg_weights,
)


def prestore(reps, path, dim=None):
    """Write knowledge representations (dimension m) to a vector cache."""
    return write_cache(reps, path, dim)


def prestore_augmented(vectors, path, dim=None):
    """Write adaptor outputs (dimension q) to a vector cache.

    Each vector carries ``entity_id`` and ``role`` ("reasoning" or "fact").
    """
    records = [VectorRecord(v.entity_id, v.role, v.vector) for v in vectors]
    return write_cache(records, path, dim)


__all__ = [
    "AGGREGATIONS", "CacheError", "CacheMissError", "EncodeError", "HashTokenEncoder",
    "KnowledgeRepresentation", "PrecomputedEncoder", "RepresentationCache", "VectorRecord",
    "aggregate", "encode_tokens", "expected_file_size", "kind_code", "prestore",
    "prestore_augmented", "represent", "wavg_weights", "write_cache",
]
