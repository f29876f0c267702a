# models/fieldio.py
"""
Artifact writers shared by every module.

Field dump layout (little endian):
    magic "SP2D" | version u32 = 1 | n u32 | L f64 | kind u8 (0 real, 1 complex)
followed by the n*n samples in row-major order (x1 fastest) as f64, interleaved
(re, im) for complex fields.
"""

import csv
import json
import logging
import os
import struct
from typing import Iterable, Sequence, Union

import numpy as np

from models.grid import RealField, ScalarField, build_grid

__all__ = ["write_field", "read_field", "write_csv", "write_json", "read_json"]

logger = logging.getLogger(__name__)

MAGIC = b"SP2D"
VERSION = 1
_HEADER = struct.Struct("<4sIIdB")

KIND_REAL = 0
KIND_COMPLEX = 1


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


# -----------------------------
# Field dumps
# -----------------------------
def write_field(path: str, f: Union[RealField, ScalarField]) -> str:
    """Write a field dump; returns the path."""
    grid = f.grid
    if isinstance(f, RealField):
        kind = KIND_REAL
        payload = np.ascontiguousarray(f.values, dtype="<f8")
    else:
        kind = KIND_COMPLEX
        payload = np.ascontiguousarray(
            np.stack((f.values.real, f.values.imag), axis=-1), dtype="<f8"
        )
    _ensure_parent(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, grid.n, grid.half_width, kind))
        fh.write(payload.tobytes(order="C"))
    return path


def read_field(path: str) -> Union[RealField, ScalarField]:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n, L, kind = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    if kind not in (KIND_REAL, KIND_COMPLEX):
        raise ValueError(f"{path}: unknown field kind {kind}")
    grid = build_grid(L, n)
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    expected = n * n * (1 if kind == KIND_REAL else 2)
    if body.size != expected:
        raise ValueError(f"{path}: expected {expected} samples, found {body.size}")
    if kind == KIND_REAL:
        return RealField(grid, body.reshape(n, n))
    pairs = body.reshape(n, n, 2)
    return ScalarField(grid, pairs[..., 0] + 1j * pairs[..., 1])


# -----------------------------
# Manifests
# -----------------------------
def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """CSV with a mandatory header row; floats written with repr for exact reruns."""
    _ensure_parent(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def write_json(path: str, obj) -> str:
    _ensure_parent(path)
    data = json.dumps(obj, ensure_ascii=False, indent=2)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(data + "\n")
    return path


def read_json(path: str, default=None):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        return default
    except Exception as e:
        logger.warning(f"Failed to read {path}: {e}")
        return default
