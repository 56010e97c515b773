"""Binary checkpoint of named float64 tensors.

Layout (little-endian): the 4-byte magic ``PGE1`` followed, until end of
file, by records of ``uint32 name_len | name (utf-8) | uint32 rank |
rank x uint32 dims | float64 payload``.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError

MAGIC = b"PGE1"


def encode(state):
    chunks = [MAGIC]
    for name, array in state.items():
        array = np.ascontiguousarray(array, dtype="<f8")
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(array.tobytes())
    return b"".join(chunks)


def decode(blob):
    if blob[:4] != MAGIC:
        raise CheckpointError("not a checkpoint: bad magic header")
    state, pos = {}, 4

    def take(n):
        nonlocal pos
        if pos + n > len(blob):
            raise CheckpointError(f"truncated checkpoint at byte {pos}")
        piece = blob[pos:pos + n]
        pos += n
        return piece

    while pos < len(blob):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        count = int(np.prod(dims)) if rank else 1
        state[name] = np.frombuffer(take(8 * count), dtype="<f8").reshape(dims).astype(np.float64)
    return state


def save(state, path):
    Path(path).write_bytes(encode(state))


def load(path):
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc.strerror}") from None
    return decode(blob)


def check_state(named, state):
    """Raise :class:`CheckpointError` listing every name or shape mismatch."""
    problems = []
    for name, t in named.items():
        if name not in state:
            problems.append(f"missing {name} (expected shape {tuple(t.shape)})")
        elif tuple(state[name].shape) != tuple(t.shape):
            problems.append(f"{name}: checkpoint shape {tuple(state[name].shape)}, "
                            f"model shape {tuple(t.shape)}")
    for name in state:
        if name not in named:
            problems.append(f"unexpected {name}")
    if problems:
        raise CheckpointError("checkpoint does not match the architecture:\n  "
                              + "\n  ".join(problems), problems)
