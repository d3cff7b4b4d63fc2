"""Versioned little-endian parameter files.

Layout: 8-byte magic, uint32 version, uint32 network count, then per network
its topology (input dim, layers, width, layer-norm affine flag, head count,
and per head a length-prefixed UTF-8 name, dim and mapping code), then a
uint64 value count followed by the raw float64 values.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .nn import MAPPINGS, Head, NetworkSpec

MAGIC = b"ADTRPRM\x00"
VERSION = 1


def _pack_spec(spec: NetworkSpec) -> bytes:
    parts = [struct.pack("<IIIBI", spec.input_dim, spec.hidden_layers, spec.hidden_width,
                         int(spec.layer_norm_affine), len(spec.heads))]
    for h in spec.heads:
        name = h.name.encode()
        parts.append(struct.pack("<I", len(name)) + name + struct.pack("<IB", h.dim, MAPPINGS.index(h.mapping)))
    return b"".join(parts)


def save_params(path: str | os.PathLike, specs: Sequence[NetworkSpec], theta: np.ndarray) -> None:
    theta = np.asarray(theta, dtype=np.float64)
    expected = sum(s.n_params for s in specs)
    if theta.shape != (expected,):
        raise ValueError(f"parameter vector has {theta.size} entries, the networks need {expected}")
    blob = [MAGIC, struct.pack("<II", VERSION, len(specs))]
    blob += [_pack_spec(s) for s in specs]
    blob.append(struct.pack("<Q", theta.size))
    blob.append(theta.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(blob))


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise ValueError("parameter file is truncated")
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def raw(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError("parameter file is truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out


def load_params(path: str | os.PathLike) -> tuple[list[NetworkSpec], np.ndarray]:
    r = _Reader(Path(path).read_bytes())
    if r.raw(len(MAGIC)) != MAGIC:
        raise ValueError("not a parameter file (bad magic)")
    version, count = r.take("<II")
    if version != VERSION:
        raise ValueError(f"unsupported parameter file version {version}")
    specs = []
    for _ in range(count):
        input_dim, layers, width, affine, n_heads = r.take("<IIIBI")
        heads = []
        for _ in range(n_heads):
            (n,) = r.take("<I")
            name = r.raw(n).decode()
            dim, code = r.take("<IB")
            if code >= len(MAPPINGS):
                raise ValueError(f"unknown mapping code {code}")
            heads.append(Head(name, dim, MAPPINGS[code]))
        specs.append(NetworkSpec(input_dim, layers, width, tuple(heads), bool(affine)))
    (size,) = r.take("<Q")
    theta = np.frombuffer(r.raw(8 * size), dtype="<f8").astype(np.float64)
    if r.pos != len(r.data):
        raise ValueError("trailing bytes after parameter values")
    if size != sum(s.n_params for s in specs):
        raise ValueError("value count does not match the stored topology")
    return specs, theta
