"""Portable bitmap masks, CSV fields and raw float32 fields with a sidecar header.

A 2D mask of shape ``(n0, n1)`` is stored as a ``n1 x n0`` image whose rows
are the array rows (image width runs along axis 1).  A 1D mask is a single
image row.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import Grid, Region, ScalarField


def _as_2d(a: np.ndarray) -> np.ndarray:
    return a.reshape(1, -1) if a.ndim == 1 else a


def write_pbm(region: Region, path: str | Path, binary: bool = True) -> None:
    """Write a region as P4 (``binary=True``) or P1 portable bitmap."""
    bits = _as_2d(region.mask).astype(np.uint8)
    rows, cols = bits.shape
    header = f"{'P4' if binary else 'P1'}\n# h={region.grid.h!r} extent={list(region.grid.extent)}\n{cols} {rows}\n"
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        if binary:
            f.write(np.packbits(bits, axis=1).tobytes())
        else:
            for row in bits:
                f.write((" ".join(map(str, row)) + "\n").encode("ascii"))


def _tokens(data: bytes, count: int, start: int) -> tuple[list[bytes], int]:
    out: list[bytes] = []
    i = start
    while len(out) < count:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        if j == i:
            raise ValueError("truncated PBM header")
        out.append(data[i:j])
        i = j
    return out, i


def read_pbm_mask(path: str | Path) -> np.ndarray:
    """Read a P1/P4 bitmap into a boolean array of shape ``(rows, cols)``."""
    data = Path(path).read_bytes()
    (magic, w, hgt), pos = _tokens(data, 3, 0)
    cols, rows = int(w), int(hgt)
    if magic == b"P4":
        pos += 1  # single whitespace byte after the header
        stride = (cols + 7) // 8
        raw = np.frombuffer(data, dtype=np.uint8, count=rows * stride, offset=pos)
        bits = np.unpackbits(raw.reshape(rows, stride), axis=1)[:, :cols]
    elif magic == b"P1":
        body = bytes(c for c in data[pos:] if c in b"01")
        if len(body) < rows * cols:
            raise ValueError("truncated P1 body")
        bits = (np.frombuffer(body[: rows * cols], dtype=np.uint8) - ord("0")).reshape(rows, cols)
    else:
        raise ValueError(f"not a PBM file: {path}")
    return bits.astype(bool)


def read_pbm(path: str | Path, grid: Grid) -> Region:
    mask = read_pbm_mask(path)
    if grid.dim == 1:
        mask = mask.reshape(-1)
    if mask.shape != grid.shape:
        raise ValueError(f"bitmap shape {mask.shape} does not match grid shape {grid.shape}")
    return Region(grid, mask)


def _header(grid: Grid) -> dict:
    return {"extent": [list(e) for e in grid.extent], "h": grid.h, "shape": list(grid.shape)}


def write_csv(u: ScalarField, path: str | Path) -> None:
    """Row-major CSV; cells outside the domain are written as ``nan``."""
    vals = _as_2d(u.values)
    with open(path, "w") as f:
        f.write(f"# {json.dumps(_header(u.grid))}\n")
        for row in vals:
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def read_csv(path: str | Path, grid: Grid) -> ScalarField:
    vals = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    return ScalarField(grid, vals.reshape(grid.shape))


def write_raw(u: ScalarField, path: str | Path) -> Path:
    """Little-endian float32 values plus a ``.hdr`` JSON sidecar; returns the sidecar path."""
    path = Path(path)
    u.values.astype("<f4").tofile(path)
    hdr = path.with_suffix(path.suffix + ".hdr")
    meta = _header(u.grid) | {"dtype": "float32-le", "order": "C", "undefined": "nan"}
    hdr.write_text(json.dumps(meta, indent=1) + "\n")
    return hdr


def read_raw(path: str | Path, grid: Grid) -> ScalarField:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".hdr").read_text())
    if tuple(meta["shape"]) != grid.shape:
        raise ValueError(f"raw field shape {meta['shape']} does not match grid shape {grid.shape}")
    vals = np.fromfile(path, dtype="<f4").astype(float).reshape(grid.shape)
    return ScalarField(grid, vals)
