"""Versioned binary checkpoint container.

Layout (all little-endian)::

    b"KARC"  u16 version  u32 meta_len  meta (UTF-8 JSON)
    u32 n_sections
    per section:  u16 name_len  name  u32 n_tensors
      per tensor: u16 name_len  name  u8 ndim  ndim x u64 dims  float64 payload
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError

MAGIC = b"KARC"
VERSION = 1


@dataclass
class Checkpoint:
    sections: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)


def _write_str(fh, s):
    raw = s.encode("utf-8")
    fh.write(struct.pack("<H", len(raw)))
    fh.write(raw)


def _read_exact(fh, n):
    buf = fh.read(n)
    if len(buf) != n:
        raise DataError("truncated checkpoint")
    return buf


def _read_str(fh):
    (n,) = struct.unpack("<H", _read_exact(fh, 2))
    return _read_exact(fh, n).decode("utf-8")


def save_checkpoint(path, ckpt: Checkpoint):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    meta = json.dumps(ckpt.metadata, sort_keys=True).encode("utf-8")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(meta)))
        fh.write(meta)
        fh.write(struct.pack("<I", len(ckpt.sections)))
        for sec_name, tensors in ckpt.sections.items():
            _write_str(fh, sec_name)
            fh.write(struct.pack("<I", len(tensors)))
            for name, arr in tensors.items():
                arr = np.asarray(arr, dtype="<f8")
                _write_str(fh, name)
                fh.write(struct.pack("<B", arr.ndim))
                fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
                fh.write(np.ascontiguousarray(arr).tobytes())
    os.replace(tmp, path)
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != MAGIC:
            raise DataError(f"{path}: not a checkpoint file")
        version, meta_len = struct.unpack("<HI", _read_exact(fh, 6))
        if version != VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        metadata = json.loads(_read_exact(fh, meta_len).decode("utf-8"))
        (n_sections,) = struct.unpack("<I", _read_exact(fh, 4))
        sections = {}
        for _ in range(n_sections):
            sec_name = _read_str(fh)
            (n_tensors,) = struct.unpack("<I", _read_exact(fh, 4))
            tensors = {}
            for _ in range(n_tensors):
                name = _read_str(fh)
                (ndim,) = struct.unpack("<B", _read_exact(fh, 1))
                shape = struct.unpack(f"<{ndim}Q", _read_exact(fh, 8 * ndim))
                count = int(np.prod(shape)) if ndim else 1
                arr = np.frombuffer(_read_exact(fh, 8 * count), dtype="<f8").reshape(shape)
                tensors[name] = arr.astype(np.float64)
            sections[sec_name] = tensors
    return Checkpoint(sections, metadata)
