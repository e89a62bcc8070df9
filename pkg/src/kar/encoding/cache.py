"""Binary vector cache for prestored representations and augmented vectors.

Layout, little-endian::

    b"KARV"      4 bytes
    version      u16
    dim          u32
    count        u64
    index        count x (u16 key_len, key bytes (UTF-8), u8 kind, u64 row)
    rows         count x dim float32

so a file holding keys k_1..k_n is exactly
``18 + sum(11 + len(k_i)) + n * dim * 4`` bytes.
"""

from __future__ import annotations

import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import CacheError

log = logging.getLogger(__name__)

MAGIC = b"KARV"
VERSION = 1
HEADER_SIZE = 4 + 2 + 4 + 8
INDEX_ENTRY_OVERHEAD = 2 + 1 + 8

# user-side and item-side knowledge share the two codes
KIND_CODES = {
    "preference": 0, "reasoning": 0, "user": 0,
    "item_factual": 1, "fact": 1, "item": 1,
}


class CacheMissError(LookupError):
    pass


def kind_code(kind):
    if isinstance(kind, (int, np.integer)):
        if kind not in (0, 1):
            raise CacheError(f"unknown kind code {kind}")
        return int(kind)
    kind = getattr(kind, "value", kind)
    try:
        return KIND_CODES[kind]
    except KeyError:
        raise CacheError(f"unknown knowledge kind {kind!r}") from None


def expected_file_size(keys, dim):
    return (HEADER_SIZE + sum(INDEX_ENTRY_OVERHEAD + len(k.encode("utf-8")) for k in keys)
            + len(keys) * dim * 4)


@dataclass
class VectorRecord:
    entity_id: str
    kind: object
    vector: np.ndarray


def write_cache(records, path, dim=None):
    """Write ``records`` (objects with entity_id, kind, vector) to ``path``.

    A repeated (entity_id, kind) keeps the last vector and logs a warning.
    """
    rows = {}
    for rec in records:
        vec = np.asarray(rec.vector)
        if vec.ndim != 1:
            raise CacheError(f"vector for {rec.entity_id!r} has shape {vec.shape}, expected 1-D")
        if dim is None:
            dim = vec.shape[0]
        elif vec.shape[0] != dim:
            raise CacheError(f"dimension mismatch: {rec.entity_id!r} has {vec.shape[0]}, expected {dim}")
        key = (str(rec.entity_id), kind_code(rec.kind))
        if key in rows:
            log.warning("duplicate cache key %s; overwriting", key)
        rows[key] = vec
    if dim is None:
        raise CacheError("cannot infer vector dimension from an empty batch")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HIQ", VERSION, dim, len(rows)))
        for i, (key, code) in enumerate(rows):
            raw = key.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise CacheError(f"key too long: {key[:40]}...")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<BQ", code, i))
        if rows:
            mat = np.stack([np.asarray(v, dtype="<f4") for v in rows.values()])
            fh.write(np.ascontiguousarray(mat, dtype="<f4").tobytes())
    os.replace(tmp, path)
    return RepresentationCache(path)


class RepresentationCache:
    """Read side: loads the index into a dict, memory-maps the rows."""

    def __init__(self, path):
        self.path = Path(path)
        if not self.path.exists():
            raise FileNotFoundError(f"cache file not found: {self.path}")
        with open(self.path, "rb") as fh:
            if fh.read(4) != MAGIC:
                raise CacheError(f"{self.path}: bad magic, not a vector cache")
            head = fh.read(14)
            if len(head) != 14:
                raise CacheError(f"{self.path}: truncated header")
            version, self.dim, self.count = struct.unpack("<HIQ", head)
            if version != VERSION:
                raise CacheError(f"{self.path}: unsupported version {version}")
            self.index = {}
            for _ in range(self.count):
                (klen,) = struct.unpack("<H", fh.read(2))
                key = fh.read(klen).decode("utf-8")
                code, row = struct.unpack("<BQ", fh.read(9))
                if row >= self.count:
                    raise CacheError(f"{self.path}: row offset {row} out of range")
                self.index[(key, code)] = row
            self.data_offset = fh.tell()
        expected = self.data_offset + self.count * self.dim * 4
        actual = self.path.stat().st_size
        if actual != expected:
            raise CacheError(f"{self.path}: size {actual} != expected {expected}")
        if self.count and self.dim:
            self.rows = np.memmap(self.path, dtype="<f4", mode="r", offset=self.data_offset,
                                  shape=(self.count, self.dim))
        else:
            self.rows = np.zeros((self.count, self.dim), dtype="<f4")

    def __len__(self):
        return self.count

    def __contains__(self, key):
        entity_id, kind = key
        return (str(entity_id), kind_code(kind)) in self.index

    def keys(self):
        return list(self.index)

    def get(self, entity_id, kind):
        try:
            row = self.index[(str(entity_id), kind_code(kind))]
        except KeyError:
            raise CacheMissError(f"{self.path}: no vector for ({entity_id!r}, {kind})") from None
        return np.array(self.rows[row])

    def matrix(self, entity_ids, kind, dtype=np.float64):
        """Stack vectors for ``entity_ids`` into an (n, dim) array."""
        code = kind_code(kind)
        rows = []
        missing = []
        for e in entity_ids:
            r = self.index.get((str(e), code))
            if r is None:
                missing.append(e)
            rows.append(r if r is not None else 0)
        if missing:
            raise CacheMissError(
                f"{self.path}: {len(missing)} missing vector(s) for kind {kind}, e.g. {missing[:5]}")
        return np.asarray(self.rows[np.asarray(rows, dtype=np.int64)], dtype=dtype)
