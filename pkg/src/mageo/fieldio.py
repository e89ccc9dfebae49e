"""MAFLD field files.

Layout: one ASCII header line ``MAFLD 1 <m> <nx> <ny> <nt>\\n`` followed by
``nx*ny*nt`` little-endian float64 values, x fastest, then y, then t.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import (DimensionMismatchError, GridError, HeaderError, TruncatedPayloadError,
                     UnsupportedVersionError)
from .grid import GridSpec, ScalarField, make_grid

MAGIC = "MAFLD"
VERSION = 1
_MAX_HEADER = 256


def write_field(f: ScalarField, path) -> None:
    g = f.grid
    header = f"{MAGIC} {VERSION} {g.m} {g.nx} {g.ny} {g.nt}\n".encode("ascii")
    payload = np.ascontiguousarray(f.values, dtype="<f8").tobytes()
    Path(path).write_bytes(header + payload)


def _parse_header(line: bytes) -> GridSpec:
    try:
        parts = line.decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise HeaderError("header is not ASCII") from exc
    if not parts or parts[0] != MAGIC:
        raise HeaderError(f"bad magic: expected {MAGIC!r}")
    if len(parts) != 6:
        raise HeaderError(f"expected 6 header tokens, got {len(parts)}")
    try:
        version, m, nx, ny, nt = (int(p) for p in parts[1:])
    except ValueError as exc:
        raise HeaderError(f"non-integer header token in {parts[1:]}") from exc
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported MAFLD version {version}")
    try:
        return make_grid(m, nx, ny, nt)
    except GridError as exc:
        raise HeaderError(f"invalid grid in header: {exc}") from exc


def read_field(path, grid: GridSpec | None = None) -> ScalarField:
    """Read a MAFLD file; if ``grid`` is given the header must match it."""
    data = Path(path).read_bytes()
    nl = data.find(b"\n", 0, _MAX_HEADER)
    if nl < 0:
        raise HeaderError("no header line terminator found")
    g = _parse_header(data[:nl])
    if grid is not None and grid != g:
        raise DimensionMismatchError(f"file grid {g} does not match expected {grid}")
    payload = data[nl + 1:]
    expected = 8 * g.size
    if len(payload) < expected:
        raise TruncatedPayloadError(f"payload has {len(payload)} bytes, expected {expected}")
    if len(payload) > expected:
        raise DimensionMismatchError(
            f"payload has {len(payload)} bytes, header dimensions imply {expected}")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(g.shape)
    return ScalarField(g, values)
