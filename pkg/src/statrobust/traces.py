"""Binary chain-trace files.

Layout (little-endian)::

    magic        8s   b"SRTRACE\\0"
    version      u16  1
    height       u32
    width        u32
    labels       u16  disparity levels D (<= 256)
    window       u32  number of stored sweeps K
    first_sweep  u32  absolute index of the first stored sweep
    seed         i64
    sampler      u8   0 = exact, 1 = approx
    degenerate   u64  collapsed hardware conditionals
    config_hash  32s  raw sha256
    planes       K * height * width u8, sweep-major then row-major
"""
from __future__ import annotations

import struct

import numpy as np

from .errors import ParseError
from .mrf import ChainTrace

MAGIC = b"SRTRACE\0"
VERSION = 1
_HEADER = struct.Struct("<8sHIIHIIqBQ32s")
_KINDS = ("exact", "approx")
_KIND_OFFSET = struct.calcsize("<8sHIIHIIq")


def encode_trace(trace: ChainTrace) -> bytes:
    h, w = trace.shape
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        h,
        w,
        trace.disparity_levels,
        trace.window,
        trace.first_sweep,
        trace.seed,
        _KINDS.index(trace.sampler_kind),
        trace.degenerate_count,
        bytes.fromhex(trace.config_hash),
    )
    return header + np.ascontiguousarray(trace.samples, dtype=np.uint8).tobytes()


def decode_trace(data: bytes) -> ChainTrace:
    if len(data) < _HEADER.size:
        raise ParseError("trace header truncated", len(data))
    (magic, version, h, w, n_labels, window, first, seed, kind, degenerate,
     digest) = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise ParseError(f"unsupported trace version {version}", 8)
    if kind >= len(_KINDS):
        raise ParseError(f"unknown sampler code {kind}", _KIND_OFFSET)
    n = window * h * w
    if len(data) - _HEADER.size != n:
        raise ParseError(
            f"expected {n} label bytes, found {len(data) - _HEADER.size}", _HEADER.size
        )
    samples = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size).reshape(window, h, w)
    if samples.size and samples.max() >= n_labels:
        raise ParseError("label out of range", _HEADER.size)
    return ChainTrace(
        samples=samples.copy(),
        disparity_levels=n_labels,
        first_sweep=first,
        seed=seed,
        sampler_kind=_KINDS[kind],
        config_hash=digest.hex(),
        degenerate_count=degenerate,
    )


def write_trace(trace: ChainTrace, path):
    with open(path, "wb") as f:
        f.write(encode_trace(trace))


def read_trace(path) -> ChainTrace:
    with open(path, "rb") as f:
        return decode_trace(f.read())
