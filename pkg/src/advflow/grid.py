"""Uniform Cartesian grids, cell fields, binary regions and ball stencils.

Cells are indexed with ``indexing="ij"``: axis 0 runs along the first
coordinate.  Values of a :class:`ScalarField` outside the domain mask are NaN
and :class:`Region` masks are always false there.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

Extent = tuple[tuple[float, float], ...]


@dataclass(frozen=True, eq=False)
class Grid:
    """Cell-centred grid with spacing ``h`` and a domain mask.

    Attributes
    ----------
    extent : tuple of (min, max) per axis
    h : cell spacing, shared by all axes
    omega : boolean array of shape ``shape``; True for cells inside the domain
    """

    extent: Extent
    h: float
    omega: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.extent)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.omega.shape

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def n_cells(self) -> int:
        """Number of cells inside the domain."""
        return int(self.omega.sum())

    def axes(self) -> list[np.ndarray]:
        return [lo + (np.arange(n) + 0.5) * self.h for (lo, _), n in zip(self.extent, self.shape)]

    def coords(self) -> np.ndarray:
        """Cell centres as an array of shape ``shape + (dim,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def index_of(self, point: Sequence[float]) -> tuple[int, ...]:
        """Index of the cell containing ``point``."""
        return tuple(
            min(n - 1, max(0, int(math.floor((p - lo) / self.h))))
            for p, (lo, _), n in zip(point, self.extent, self.shape)
        )

    @property
    def diameter(self) -> float:
        """Largest centre-to-centre distance between two domain cells."""
        pts = self.coords()[self.omega]
        if len(pts) < 2:
            return 0.0
        if self.dim == 1:
            return float(pts.max() - pts.min())
        # the farthest pair lies on the convex hull of the extreme cells
        from scipy.spatial import ConvexHull

        try:
            hull = pts[ConvexHull(pts).vertices]
        except Exception:  # collinear cells
            hull = pts
        diff = hull[:, None, :] - hull[None, :, :]
        return float(np.sqrt((diff**2).sum(-1)).max())

    @property
    def clamp(self) -> float:
        """Distance reported to an empty set: larger than any real distance."""
        return self.diameter + self.h

    def field(self, values: np.ndarray) -> ScalarField:
        return ScalarField(self, values)

    def region(self, mask: np.ndarray) -> Region:
        return Region(self, mask)

    def full(self) -> Region:
        return Region(self, self.omega)

    def empty(self) -> Region:
        return Region(self, np.zeros(self.shape, dtype=bool))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values on the cells of a grid (NaN outside the domain)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"field shape {v.shape} does not match grid shape {self.grid.shape}")
        v = np.where(self.grid.omega, v, np.nan)
        if not np.all(np.isfinite(v[self.grid.omega])):
            raise ValueError("field values must be finite on all domain cells")
        object.__setattr__(self, "values", _frozen(v))

    def inside(self) -> np.ndarray:
        """Values on domain cells, in row-major order."""
        return self.values[self.grid.omega]

    def filled(self, fill: float = 0.0) -> np.ndarray:
        return np.where(self.grid.omega, self.values, fill)

    def sup_norm(self) -> float:
        return float(np.abs(self.inside()).max(initial=0.0))

    def __neg__(self) -> ScalarField:
        return ScalarField(self.grid, -self.values)

    def __add__(self, other: ScalarField | float) -> ScalarField:
        o = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values + o)

    def __sub__(self, other: ScalarField | float) -> ScalarField:
        o = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values - o)

    def __mul__(self, c: float) -> ScalarField:
        return ScalarField(self.grid, self.values * c)

    __rmul__ = __mul__

    def maximum(self, other: ScalarField) -> ScalarField:
        return ScalarField(self.grid, np.maximum(self.values, other.values))

    def minimum(self, other: ScalarField) -> ScalarField:
        return ScalarField(self.grid, np.minimum(self.values, other.values))

    def superlevel(self, t: float = 0.0) -> Region:
        """Region ``{u > t}``."""
        return Region(self.grid, self.filled(-np.inf) > t)


@dataclass(frozen=True, eq=False)
class Region:
    """Binary set of domain cells."""

    grid: Grid
    mask: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != self.grid.shape:
            raise ValueError(f"mask shape {m.shape} does not match grid shape {self.grid.shape}")
        object.__setattr__(self, "mask", _frozen(m & self.grid.omega))

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def volume(self) -> float:
        return self.count * self.grid.cell_volume

    def is_empty(self) -> bool:
        return self.count == 0

    def is_full(self) -> bool:
        return self.count == self.grid.n_cells

    def complement(self) -> Region:
        """Complement inside the domain."""
        return Region(self.grid, self.grid.omega & ~self.mask)

    def indicator(self) -> ScalarField:
        return ScalarField(self.grid, self.mask.astype(float))

    def __or__(self, other: Region) -> Region:
        return Region(self.grid, self.mask | other.mask)

    def __and__(self, other: Region) -> Region:
        return Region(self.grid, self.mask & other.mask)

    def __le__(self, other: Region) -> bool:
        return bool(np.all(~self.mask | other.mask))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Region) and np.array_equal(self.mask, other.mask)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class Stencil:
    """Integer offsets ``o`` with ``|o| h <= radius`` (closed ball)."""

    radius: float
    h: float
    offsets: np.ndarray

    @property
    def size(self) -> int:
        return len(self.offsets)

    @property
    def reach(self) -> int:
        """Largest offset component, in cells."""
        return int(np.abs(self.offsets).max(initial=0))


_BALL = re.compile(r"^\s*(?:centered-ball|ball)\s*[(:]\s*([-+0-9.eE]+)\s*\)?\s*$")


def _omega_mask(extent: Extent, h: float, shape: tuple[int, ...], spec) -> np.ndarray:
    if isinstance(spec, np.ndarray):
        mask = np.asarray(spec, dtype=bool)
        if mask.shape != shape:
            raise ValueError(f"domain mask shape {mask.shape} does not match grid shape {shape}")
        return mask.copy()
    if spec in (None, "full-box", "box"):
        return np.ones(shape, dtype=bool)
    if isinstance(spec, tuple) and spec and spec[0] == "centered-ball":
        radius = float(spec[1])
    elif isinstance(spec, str) and _BALL.match(spec):
        radius = float(_BALL.match(spec).group(1))
    else:
        path = Path(spec[1] if isinstance(spec, tuple) else str(spec).removeprefix("mask:"))
        if not path.exists():
            raise ValueError(f"unknown domain specification {spec!r}")
        from .formats import read_pbm_mask

        mask = read_pbm_mask(path)
        if mask.shape != shape:
            raise ValueError(f"mask file {path} has shape {mask.shape}, grid needs {shape}")
        return mask
    axes = [lo + (np.arange(n) + 0.5) * h for (lo, _), n in zip(extent, shape)]
    mesh = np.meshgrid(*axes, indexing="ij")
    centre = [(lo + hi) / 2 for lo, hi in extent]
    r2 = sum((m - c) ** 2 for m, c in zip(mesh, centre))
    return r2 < radius**2


def build_grid(extent: Sequence[Sequence[float]], h: float, omega="full-box") -> Grid:
    """Build a grid over ``extent`` with spacing ``h``.

    ``omega`` selects the domain: ``"full-box"``, ``"centered-ball(r)"`` (open
    ball about the box centre), ``("centered-ball", r)``, a PBM mask file
    (``"mask:path"`` or a path) or an explicit boolean array.
    """
    if not h > 0:
        raise ValueError(f"spacing must be positive, got h={h}")
    ext = tuple((float(lo), float(hi)) for lo, hi in extent)
    if not 1 <= len(ext) <= 2:
        raise ValueError("only 1D and 2D grids are supported")
    shape = []
    for lo, hi in ext:
        length = hi - lo
        if not length > 0:
            raise ValueError(f"empty extent [{lo}, {hi}]")
        n = round(length / h)
        if n < 1 or abs(n * h - length) > 1e-12 * length:
            raise ValueError(f"extent length {length} is not a multiple of h={h}")
        shape.append(n)
    mask = _omega_mask(ext, h, tuple(shape), omega)
    if not mask.any():
        raise ValueError("the domain contains no cells")
    _, ncomp = ndimage.label(mask)
    if ncomp != 1:
        raise ValueError(f"the domain is disconnected ({ncomp} face-connected components)")
    return Grid(ext, float(h), _frozen(mask))


def ball_stencil(grid: Grid, eps: float) -> Stencil:
    """All offsets with ``|o| h <= eps``, lexicographically ordered."""
    if not eps > 0:
        raise ValueError(f"stencil radius must be positive, got eps={eps}")
    if eps < grid.h:
        warnings.warn(f"eps={eps} < h={grid.h}: the stencil is the centre cell only", stacklevel=2)
    return Stencil(float(eps), grid.h, _frozen(ball_offsets(eps / grid.h, grid.dim)))


def ball_offsets(r: float, dim: int) -> np.ndarray:
    """Integer vectors of length at most ``r``, lexicographically ordered."""
    # closed ball; the relative slack keeps exact lattice distances inside
    r2 = r * r * (1 + 1e-12)
    m = int(math.floor(r * (1 + 1e-12)))
    rng = np.arange(-m, m + 1)
    cand = np.stack(np.meshgrid(*([rng] * dim), indexing="ij"), -1).reshape(-1, dim)
    return cand[(cand**2).sum(1) <= r2].astype(np.int64)


def _shifted(src: np.ndarray, o: np.ndarray, fill: float) -> np.ndarray:
    """``out[x] = src[x + o]`` with ``fill`` where ``x + o`` leaves the array."""
    out = np.full_like(src, fill)
    dst_sl, src_sl = [], []
    for k, n in zip(o, src.shape):
        k = int(k)
        if abs(k) >= n:
            return out
        dst_sl.append(slice(max(0, -k), n - max(0, k)))
        src_sl.append(slice(max(0, k), n - max(0, -k)))
    out[tuple(dst_sl)] = src[tuple(src_sl)]
    return out


def _window_reduce(values: np.ndarray, omega: np.ndarray, s: Stencil, op, fill: float) -> np.ndarray:
    src = np.where(omega, values, fill)
    out = np.full_like(src, fill)
    for o in s.offsets:
        op(out, _shifted(src, o, fill), out=out)
    return np.where(omega, out, np.nan)


def _check_reach(grid: Grid, s: Stencil) -> None:
    if s.radius > grid.diameter + grid.h:
        warnings.warn("stencil radius exceeds the domain diameter", stacklevel=3)


def dilate(u: ScalarField, s: Stencil) -> ScalarField:
    """Window maximum over domain cells within the stencil."""
    _check_reach(u.grid, s)
    return ScalarField(u.grid, _window_reduce(u.values, u.grid.omega, s, np.maximum, -np.inf))


def erode(u: ScalarField, s: Stencil) -> ScalarField:
    """Window minimum over domain cells within the stencil."""
    _check_reach(u.grid, s)
    return ScalarField(u.grid, _window_reduce(u.values, u.grid.omega, s, np.minimum, np.inf))


def inner_parallel(grid: Grid, a: float) -> Region:
    """Domain cells whose distance to the outside of the domain exceeds ``a``.

    The outside consists of the cells off the mask and the half-cell layer
    beyond the box, so a cell centre at distance ``k h + h/2`` from the box
    wall has margin ``k h + h/2``.
    """
    if a < 0:
        raise ValueError("a must be nonnegative")
    pad = np.pad(grid.omega, 1, constant_values=False)
    dist = ndimage.distance_transform_edt(pad, sampling=grid.h)[(slice(1, -1),) * grid.dim]
    # distance to the nearest outside centre overshoots the wall by h/2
    return Region(grid, grid.omega & (dist - grid.h / 2 > a))
