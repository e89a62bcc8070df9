from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, KarError
from .cache import CacheMissError, RepresentationCache, kind_code

AGGREGATIONS = ("avg", "last", "wavg")


class EncodeError(KarError):
    pass


@dataclass
class KnowledgeRepresentation:
    vector: np.ndarray
    entity_id: str
    kind: str


class HashTokenEncoder:
    """Whitespace tokens mapped to seeded pseudo-random vectors.

    Each token's 64-bit BLAKE2b hash (salted with ``seed``) seeds a generator
    that draws ``dim`` standard normals, scaled by 1/sqrt(dim).
    """

    def __init__(self, dim=64, seed=0):
        if not 1 <= dim <= 4096:
            raise ValueError(f"dim must be in [1, 4096], got {dim}")
        self.dim = dim
        self.seed = seed
        self._memo = {}

    def tokenize(self, text):
        return text.split()

    def token_vector(self, token):
        vec = self._memo.get(token)
        if vec is None:
            h = hashlib.blake2b(f"{self.seed}\x00{token}".encode("utf-8"), digest_size=8)
            rng = np.random.default_rng(int.from_bytes(h.digest(), "little"))
            vec = rng.standard_normal(self.dim) / np.sqrt(self.dim)
            self._memo[token] = vec
        return vec

    def encode(self, text, entity_id=None, kind=None):
        tokens = self.tokenize(text)
        if not tokens:
            raise EncodeError("cannot encode empty text")
        return np.stack([self.token_vector(t) for t in tokens])


_TOKEN_ROW = re.compile(r"^(.*)/(\d+)$")


class PrecomputedEncoder:
    """Token vectors exported by an external language model.

    The source is a vector cache where an entity's token rows are stored
    under keys ``"<entity_id>/0" .. "<entity_id>/T-1"``; a bare
    ``"<entity_id>"`` key is a single pre-aggregated row (T = 1). The text
    argument is ignored.
    """

    def __init__(self, path):
        self.cache = RepresentationCache(path)
        self.dim = self.cache.dim
        self._groups = {}
        for (key, code), row in self.cache.index.items():
            m = _TOKEN_ROW.match(key)
            if m:
                self._groups.setdefault((m.group(1), code), []).append((int(m.group(2)), row))
            else:
                self._groups.setdefault((key, code), []).append((0, row))
        for rows in self._groups.values():
            rows.sort()

    def encode(self, text, entity_id=None, kind=None):
        if entity_id is None or kind is None:
            raise EncodeError("precomputed encoder needs entity_id and kind")
        rows = self._groups.get((str(entity_id), kind_code(kind)))
        if not rows:
            raise CacheMissError(f"{self.cache.path}: no precomputed vectors for ({entity_id!r}, {kind})")
        return np.asarray(self.cache.rows[[r for _, r in rows]], dtype=np.float64)


def encode_tokens(text, encoder, entity_id=None, kind=None):
    """T x m token matrix for ``text``."""
    if not text or not text.strip():
        raise EncodeError("cannot encode empty text")
    mat = np.asarray(encoder.encode(text, entity_id=entity_id, kind=kind), dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] < 1:
        raise EncodeError(f"encoder returned shape {mat.shape}, expected (T>=1, m)")
    return mat


def wavg_weights(T):
    t = np.arange(1, T + 1, dtype=np.float64)
    return t / t.sum()


def aggregate(tokens, method="avg"):
    tokens = np.asarray(tokens, dtype=np.float64)
    if tokens.ndim != 2 or tokens.shape[0] < 1:
        raise EncodeError(f"need a (T>=1, m) token matrix, got shape {tokens.shape}")
    if method == "avg":
        return tokens.mean(axis=0)
    if method == "last":
        return tokens[-1].copy()
    if method == "wavg":
        return wavg_weights(tokens.shape[0]) @ tokens
    raise ConfigError(f"unknown aggregation {method!r}; expected one of {AGGREGATIONS}")


def represent(text, encoder, method="avg", entity_id="", kind="preference"):
    tokens = encode_tokens(text, encoder, entity_id=entity_id, kind=kind)
    return KnowledgeRepresentation(aggregate(tokens, method), str(entity_id), str(kind))
