"""Reading and writing fields in the DFLD container.

A DFLD file is one line of JSON followed by raw little-endian complex samples.
The header records the grid (``d``, ``M``, ``L_box``), the component count
``N``, the sample type (``c64`` or ``c128``), the space (``physical`` or
``frequency``) and ``count``, the number of stored fields. Samples follow in
row-major axis order, component-major, one field after another. Sample ``j``
along an axis sits at ``x = j dx`` (wrapped to the centered box) or at the
matching ``fftfreq`` frequency. An optional ``meta`` object carries anything
else a producer wants to record (a synthesis ledger, for instance).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .field import Field, GridSpec, SequenceFamily

MAGIC = "DFLD"
VERSION = 1
_DTYPES = {"c64": np.dtype("<c8"), "c128": np.dtype("<c16")}


class DFLDError(ValueError):
    pass


def write_dfld(path, fields, dtype: str = "c128", space: str | None = None, meta: dict | None = None) -> None:
    """Write a field, a family or a list of fields sharing one grid."""
    if isinstance(fields, Field):
        fields = [fields]
    fields = list(fields)
    if not fields:
        raise DFLDError("nothing to write")
    if dtype not in _DTYPES:
        raise DFLDError(f"dtype must be one of {sorted(_DTYPES)}, got {dtype!r}")
    grid, N = fields[0].grid, fields[0].N
    space = space or fields[0].space
    for f in fields:
        if f.grid != grid or f.N != N:
            raise DFLDError("all stored fields must share one grid and component count")
    header = {
        "format": MAGIC,
        "version": VERSION,
        "d": grid.d,
        "M": grid.M,
        "L_box": grid.L_box,
        "N": N,
        "dtype": dtype,
        "space": space,
        "count": len(fields),
        "meta": meta or {},
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        for f in fields:
            arr = f.in_space(space).samples
            fh.write(np.ascontiguousarray(arr, dtype=_DTYPES[dtype]).tobytes())


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        line = fh.readline()
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DFLDError(f"{path}: header is not a JSON line") from exc
    for key in ("d", "M", "L_box", "N", "dtype", "space"):
        if key not in header:
            raise DFLDError(f"{path}: header lacks {key!r}")
    if header["dtype"] not in _DTYPES:
        raise DFLDError(f"{path}: unknown dtype {header['dtype']!r}")
    return header


def read_dfld(path) -> tuple[list[Field], dict]:
    """All stored fields and the header."""
    header = read_header(path)
    grid = GridSpec(int(header["d"]), int(header["M"]), float(header["L_box"]))
    N = int(header["N"])
    count = int(header.get("count", 1))
    dt = _DTYPES[header["dtype"]]
    per = N * grid.M**grid.d
    with open(path, "rb") as fh:
        fh.readline()
        raw = np.frombuffer(fh.read(), dtype=dt)
    if raw.size != count * per:
        raise DFLDError(f"{path}: expected {count * per} samples, found {raw.size}")
    arr = raw.astype(complex).reshape((count, N) + grid.shape)
    return [Field(grid, a, header["space"]) for a in arr], header


def read_family(path) -> tuple[SequenceFamily, dict]:
    fields, header = read_dfld(path)
    return SequenceFamily(tuple(fields)), header


def write_slice_csv(path, f: Field, component: int | None = None) -> None:
    """``|f(x)|`` along the first axis through the origin, in increasing ``x``.

    With ``component=None`` the modulus is euclidean over components.
    """
    g = f.grid
    phys = f.phys
    line = phys[(slice(None), slice(None)) + (0,) * (g.d - 1)]
    mod = np.abs(line[component]) if component is not None else np.sqrt(np.sum(np.abs(line) ** 2, axis=0))
    order = np.argsort(g.x1d)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "modulus"])
        for i in order:
            w.writerow([f"{g.x1d[i]:.12g}", f"{mod[i]:.12g}"])


def write_trace_csv(path, columns: dict) -> None:
    """Columns of equal length as a CSV table (keys become the header)."""
    keys = list(columns)
    n = max((len(columns[k]) for k in keys), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for i in range(n):
            row = []
            for k in keys:
                v = columns[k][i] if i < len(columns[k]) else ""
                row.append(f"{v:.12g}" if isinstance(v, float) else v)
            w.writerow(row)


def ensure_parent(path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p
