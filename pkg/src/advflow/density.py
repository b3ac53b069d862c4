"""Class-conditional densities and the Bayes classifier.

Analytic families carry closed-form values, gradients and Hessians so that the
asymptotic checks in :mod:`advflow.analysis` never rely on finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import Grid, Region, _frozen


class AnalyticDensity:
    """Closed form for ``rho0`` and ``rho1`` evaluated at points ``(..., dim)``."""

    name = "custom"

    def values(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def gradients(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def bounds(self, extent) -> tuple[float, float]:
        """Lower and upper bound of ``rho0 + rho1`` over the box ``extent``."""
        raise NotImplementedError

    def swapped(self) -> AnalyticDensity:
        return _Swapped(self)


class _Swapped(AnalyticDensity):
    def __init__(self, base: AnalyticDensity):
        self.base = base
        self.name = base.name

    def values(self, x):
        a, b = self.base.values(x)
        return b, a

    def gradients(self, x):
        a, b = self.base.gradients(x)
        return b, a

    def bounds(self, extent):
        return self.base.bounds(extent)

    def swapped(self):
        return self.base


@dataclass(frozen=True)
class Constant(AnalyticDensity):
    c0: float = 0.5
    c1: float = 0.5
    name = "constant"

    def values(self, x):
        shp = np.shape(x)[:-1]
        return np.full(shp, self.c0), np.full(shp, self.c1)

    def gradients(self, x):
        z = np.zeros(np.shape(x))
        return z, z.copy()

    def bounds(self, extent):
        c = self.c0 + self.c1
        return c, c


@dataclass(frozen=True)
class RadialExp(AnalyticDensity):
    """``rho_i(x) = c_i exp(a |x|^2 / 2)``."""

    a: float
    c0: float = 0.5
    c1: float = 0.5
    name = "radial-exp"

    def _g(self, x):
        return np.exp(0.5 * self.a * np.sum(np.asarray(x) ** 2, axis=-1))

    def values(self, x):
        g = self._g(x)
        return self.c0 * g, self.c1 * g

    def gradients(self, x):
        gx = (self.a * self._g(x))[..., None] * np.asarray(x)
        return self.c0 * gx, self.c1 * gx

    def bounds(self, extent):
        lo2 = sum(0.0 if lo <= 0 <= hi else min(lo * lo, hi * hi) for lo, hi in extent)
        hi2 = sum(max(lo * lo, hi * hi) for lo, hi in extent)
        c = self.c0 + self.c1
        e1, e2 = np.exp(0.5 * self.a * lo2), np.exp(0.5 * self.a * hi2)
        return c * min(e1, e2), c * max(e1, e2)


@dataclass(frozen=True)
class AxisExp(AnalyticDensity):
    """``rho_i(x) = c_i exp(rate * x[axis])``."""

    rate: float
    c0: float = 0.5
    c1: float = 0.5
    axis: int = 0
    name = "axis-exp"

    def _g(self, x):
        return np.exp(self.rate * np.asarray(x)[..., self.axis])

    def values(self, x):
        g = self._g(x)
        return self.c0 * g, self.c1 * g

    def gradients(self, x):
        e = np.zeros(np.shape(x))
        e[..., self.axis] = self.rate * self._g(x)
        return self.c0 * e, self.c1 * e

    def bounds(self, extent):
        lo, hi = extent[self.axis]
        c = self.c0 + self.c1
        e1, e2 = np.exp(self.rate * lo), np.exp(self.rate * hi)
        return c * min(e1, e2), c * max(e1, e2)


def _bump(r2: np.ndarray) -> np.ndarray:
    # C^1 profile (1 - r^2)^2 on the unit ball
    return np.where(r2 < 1, (1 - r2) ** 2, 0.0)


def _bump_grad_factor(r2: np.ndarray) -> np.ndarray:
    # d/dx (1 - |x|^2)^2 = -4 (1 - |x|^2) x
    return np.where(r2 < 1, -4 * (1 - r2), 0.0)


@dataclass(frozen=True)
class TwoBump(AnalyticDensity):
    """``rho_i(x) = base + amp_i * phi(|x - c_i| / w_i)`` with ``phi(r) = (1 - r^2)_+^2``."""

    centers: tuple[tuple[float, ...], tuple[float, ...]]
    widths: tuple[float, float]
    amplitudes: tuple[float, float] = (1.0, 1.0)
    base: float = 0.25
    name = "two-bump"

    def _parts(self, x, i):
        y = (np.asarray(x) - np.asarray(self.centers[i], dtype=float)) / self.widths[i]
        return y, np.sum(y * y, axis=-1)

    def values(self, x):
        out = []
        for i in range(2):
            _, r2 = self._parts(x, i)
            out.append(self.base + self.amplitudes[i] * _bump(r2))
        return out[0], out[1]

    def gradients(self, x):
        out = []
        for i in range(2):
            y, r2 = self._parts(x, i)
            out.append((self.amplitudes[i] * _bump_grad_factor(r2) / self.widths[i])[..., None] * y)
        return out[0], out[1]

    def bounds(self, extent):
        return 2 * self.base, 2 * self.base + self.amplitudes[0] + self.amplitudes[1]


@dataclass(frozen=True, eq=False)
class DensityPair:
    """Sampled densities ``rho0``, ``rho1`` and their sum ``rho`` (NaN off the domain).

    ``c_rho`` is a strict bound ``c_rho < rho < 1 / c_rho`` on the domain.
    """

    grid: Grid
    rho0: np.ndarray = field(repr=False)
    rho1: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)
    c_rho: float
    analytic: AnalyticDensity | None = None

    @property
    def rho_min(self) -> float:
        return float(self.rho[self.grid.omega].min())

    def swapped(self) -> DensityPair:
        """Exchange the roles of the two classes."""
        an = self.analytic.swapped() if self.analytic is not None else None
        return DensityPair(self.grid, self.rho1, self.rho0, self.rho, self.c_rho, an)


def from_arrays(grid: Grid, rho0: np.ndarray, rho1: np.ndarray, c_rho: float | None = None,
                analytic: AnalyticDensity | None = None) -> DensityPair:
    """Validate sampled densities and build a :class:`DensityPair`."""
    om = grid.omega
    r0 = np.where(om, np.asarray(rho0, dtype=float), np.nan)
    r1 = np.where(om, np.asarray(rho1, dtype=float), np.nan)
    if np.any(r0[om] < 0) or np.any(r1[om] < 0):
        raise ValueError("densities must be nonnegative")
    rho = r0 + r1
    lo, hi = float(rho[om].min()), float(rho[om].max())
    if not lo > 0:
        raise ValueError("rho0 + rho1 must be positive on the domain")
    if c_rho is None:
        c_rho = 0.99 * min(lo, 1.0 / hi)
    elif not (c_rho < lo and hi < 1.0 / c_rho):
        raise ValueError(f"c_rho={c_rho} does not bound rho in [{lo}, {hi}]")
    return DensityPair(grid, _frozen(r0), _frozen(r1), _frozen(rho), float(c_rho), analytic)


def analytic_density(name: str, params: Sequence[float] | dict, grid: Grid) -> DensityPair:
    """Sample a named density family at the cell centres.

    ``constant``: ``(c0, c1)``.  ``radial-exp``: ``(a, c0, c1)`` with
    ``rho_i = c_i exp(a |x|^2 / 2)``.  ``axis-exp``: ``(rate, c0, c1[, axis])``
    with ``rho_i = c_i exp(rate x[axis])``.  ``two-bump``: keyword parameters of
    :class:`TwoBump` or the flat list ``(x0.., w0, a0, x1.., w1, a1, base)``.
    """
    key = name.replace("_", "-").lower()
    if key == "constant":
        an = Constant(*map(float, params)) if params else Constant()
    elif key == "radial-exp":
        an = RadialExp(*map(float, params))
    elif key == "axis-exp":
        p = list(map(float, params))
        an = AxisExp(p[0], *p[1:3], *(int(v) for v in p[3:4]))
    elif key == "two-bump":
        if isinstance(params, dict):
            an = TwoBump(**params)
        else:
            p = list(map(float, params))
            n = grid.dim
            if len(p) != 2 * (n + 2) + 1:
                raise ValueError(f"two-bump expects {2 * (n + 2) + 1} parameters, got {len(p)}")
            c0, w0, a0 = tuple(p[:n]), p[n], p[n + 1]
            c1, w1, a1 = tuple(p[n + 2 : 2 * n + 2]), p[2 * n + 2], p[2 * n + 3]
            an = TwoBump((c0, c1), (w0, w1), (a0, a1), p[-1])
    else:
        raise ValueError(f"unknown density family {name!r}")
    lo, hi = an.bounds(grid.extent)
    if not lo > 0:
        raise ValueError(f"{name} density with parameters {params} is not positive on the extent")
    x = grid.coords()
    r0, r1 = an.values(x)
    if np.any(r0 < 0) or np.any(r1 < 0):
        raise ValueError(f"{name} density with parameters {params} has negative values")
    c_rho = 0.99 * min(lo, 1.0 / hi)
    return from_arrays(grid, r0, r1, c_rho, an)


def bayes_classifier(d: DensityPair) -> Region:
    """The cells where class 1 is strictly more likely, ``{rho1 > rho0}``."""
    om = d.grid.omega
    return Region(d.grid, om & (np.where(om, d.rho1, 0) > np.where(om, d.rho0, 0)))
