"""Nonlocal total variation, nonlocal perimeter and the movement energy.

For a field ``u`` and densities ``rho0``, ``rho1``::

    TV(u) = (h^N / eps) * sum_x [ (dilate(u) - u) rho0 + (u - erode(u)) rho1 ]

The dilation term penalizes cells lying below a larger value within distance
``eps``; it is weighted by the class-0 density.  The erosion term is the
mirror image for class 1, which makes the functional orientation-sensitive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import DensityPair
from .distance import dist_to_boundary
from .grid import Region, ScalarField, Stencil, ball_stencil, dilate, erode


@dataclass(frozen=True)
class EnergyBreakdown:
    tv0: float
    tv1: float
    total: float
    eps: float
    quadrature: float


def _stencil(u: ScalarField, eps: float) -> Stencil:
    if eps < u.grid.h:
        raise ValueError(f"eps={eps} is below the grid spacing h={u.grid.h}")
    return ball_stencil(u.grid, eps)


def tv_eps(u: ScalarField, d: DensityPair, eps: float, stencil: Stencil | None = None) -> EnergyBreakdown:
    s = stencil if stencil is not None else _stencil(u, eps)
    om = u.grid.omega
    v = u.values[om]
    up = dilate(u, s).values[om] - v
    down = v - erode(u, s).values[om]
    w = u.grid.cell_volume / eps
    tv0 = w * float(np.sum(up * d.rho0[om]))
    tv1 = w * float(np.sum(down * d.rho1[om]))
    return EnergyBreakdown(tv0, tv1, tv0 + tv1, eps, u.grid.cell_volume)


def per_eps(a: Region, d: DensityPair, eps: float, stencil: Stencil | None = None) -> EnergyBreakdown:
    return tv_eps(a.indicator(), d, eps, stencil)


def coarea_check(u: ScalarField, d: DensityPair, eps: float) -> float:
    """Absolute difference between ``TV(u)`` and the level-set integral of perimeters."""
    s = _stencil(u, eps)
    total = tv_eps(u, d, eps, s).total
    levels = np.unique(u.inside())
    acc = 0.0
    for lo, hi in zip(levels[:-1], levels[1:]):
        acc += (hi - lo) * per_eps(u.superlevel(lo), d, eps, s).total
    return abs(total - acc)


def submodularity_gap(u: ScalarField, v: ScalarField, d: DensityPair, eps: float) -> float:
    """``TV(u) + TV(v) - TV(max(u, v)) - TV(min(u, v))``; never below rounding."""
    s = _stencil(u, eps)
    t = lambda f: tv_eps(f, d, eps, s).total  # noqa: E731
    return t(u) + t(v) - t(u.maximum(v)) - t(u.minimum(v))


def atw_energy(e: Region, a: Region, d: DensityPair, eps: float) -> float:
    """Distance-weighted fidelity to ``a`` plus the nonlocal perimeter of ``e``."""
    if a.is_empty() or a.is_full():
        raise ValueError("the reference region must be neither empty nor the whole domain")
    om = a.grid.omega
    flip = (e.mask != a.mask)[om]
    dist = dist_to_boundary(a).values[om]
    fid = a.grid.cell_volume * float(np.sum(flip * dist * d.rho[om])) / eps
    return fid + per_eps(e, d, eps).total


def orientation_asymmetry(u: ScalarField, d: DensityPair, eps: float) -> float:
    """``TV(-u; rho0, rho1) - TV(u; rho1, rho0)``, zero up to rounding."""
    return tv_eps(-u, d, eps).total - tv_eps(u, d.swapped(), eps).total
