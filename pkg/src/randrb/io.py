"""Binary persistence of reduced bases and CSV helpers.

Basis file layout (little-endian)::

    8 bytes   magic b"RRBBASIS"
    uint32    format version
    uint64    N_D (rows)
    uint64    N (columns)
    int64     seed (-1 when absent)
    uint64    length of the JSON parameter blob
    bytes     JSON parameters (UTF-8)
    float64   N_D * N entries, column-major
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .rbgen import ReducedBasis

MAGIC = b"RRBBASIS"
VERSION = 1
_HEAD = struct.Struct("<8sIQQqQ")


class BasisFormatError(ValueError):
    pass


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + "_singular_values.csv")


def write_singular_values(path, sigma) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "singular_value"])
        for i, s in enumerate(np.asarray(sigma, dtype=float)):
            w.writerow([i, f"{s:.17g}"])


def read_singular_values(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return np.array([float(r[1]) for r in rows])


def save_basis(path, basis: ReducedBasis, sidecar: bool = True) -> None:
    """Write ``basis`` to ``path`` and, optionally, its snapshot singular
    values to the sidecar CSV next to it."""
    params = dict(basis.params)
    params["windows"] = list(basis.windows)
    params["n_steps"] = basis.n_steps
    blob = json.dumps(params, sort_keys=True).encode("utf-8")
    seed = params.get("seed")
    seed = -1 if seed is None else int(seed)
    n_d, n = basis.U.shape
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, VERSION, n_d, n, seed, len(blob)))
        fh.write(blob)
        fh.write(np.asfortranarray(basis.U, dtype="<f8").tobytes(order="F"))
    if sidecar:
        write_singular_values(sidecar_path(path), basis.singular_values)


def load_basis(path) -> ReducedBasis:
    """Inverse of :func:`save_basis`; reads the sidecar when present."""
    data = Path(path).read_bytes()
    if len(data) < _HEAD.size:
        raise BasisFormatError("file too short for a basis header")
    magic, version, n_d, n, _seed, nblob = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise BasisFormatError("not a basis file")
    if version != VERSION:
        raise BasisFormatError(f"unsupported basis format version {version}")
    off = _HEAD.size
    params = json.loads(data[off:off + nblob].decode("utf-8"))
    off += nblob
    if len(data) - off != 8 * n_d * n:
        raise BasisFormatError("payload size does not match the header")
    U = np.frombuffer(data, dtype="<f8", offset=off).reshape((n_d, n), order="F").copy()
    windows = tuple(params.pop("windows", ()))
    n_steps = params.pop("n_steps", 0)
    side = sidecar_path(path)
    sigma = read_singular_values(side) if side.exists() else np.array([])
    return ReducedBasis(U, sigma, params, windows, n_steps)
