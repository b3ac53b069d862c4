"""Closed-form oracles: pushforward subgradients, the weighted 1-Laplacian,
cone barriers, radial flow solutions and set distances.

Everything here is evaluated pointwise from analytic descriptors, so these
functions work in any dimension; only the grid-based helpers are limited to
the dimensions supported by :mod:`advflow.grid`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .density import DensityPair
from .distance import edt
from .grid import Grid, Region, ScalarField, inner_parallel


class NotAdmissible(ValueError):
    """``eps`` is too large for the curvature of the test function."""


class Extinct(ValueError):
    """The radial flow has no positive radius at the requested time."""

    def __init__(self, t_ext: float):
        super().__init__(f"the radius vanishes at t = {t_ext:.6g}")
        self.t_ext = t_ext


# ---------------------------------------------------------------------------
# smooth test functions


@dataclass(frozen=True)
class SmoothTestFunction:
    """A smooth function with analytic gradient and Hessian.

    Parameters
    ----------
    kind : ``"linear"``, ``"radial"`` (``|x - c|``), ``"radial-quadratic"``
        (``alpha |x - c|^2``) or ``"custom"``
    c_grad : certified lower bound of ``|grad u|`` on the evaluation set
    lambda_max : certified upper bound of the Hessian eigenvalues there
    rmin : radial kinds are evaluated only where ``|x - c| >= rmin``
    """

    kind: str
    value: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    gradient: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    hessian: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    c_grad: float
    lambda_max: float
    center: tuple[float, ...] | None = None
    rmin: float = 0.0

    def admissible(self, eps: float) -> bool:
        return self.lambda_max <= 0 or eps < self.c_grad / self.lambda_max

    def check(self, eps: float) -> None:
        if not self.admissible(eps):
            raise NotAdmissible(f"eps={eps} is not below c_grad/lambda_max = "
                                f"{self.c_grad / self.lambda_max:.4g}")

    def valid(self, x: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """Points whose ``margin``-ball lies in the evaluation set."""
        x = np.asarray(x, dtype=float)
        if self.center is None:
            return np.ones(x.shape[:-1], dtype=bool)
        r = np.linalg.norm(x - np.asarray(self.center), axis=-1)
        return r >= self.rmin + margin

    def normal(self, x: np.ndarray) -> np.ndarray:
        g = self.gradient(x)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def normal_jacobian(self, x: np.ndarray) -> np.ndarray:
        """``grad n`` with ``n = grad u / |grad u|``: ``(I - n n^T) H / |grad u|``."""
        g = self.gradient(x)
        gn = np.linalg.norm(g, axis=-1)
        n = g / gn[..., None]
        dim = g.shape[-1]
        proj = np.eye(dim) - n[..., :, None] * n[..., None, :]
        return proj @ self.hessian(x) / gn[..., None, None]


def linear(a: Sequence[float], b: float = 0.0) -> SmoothTestFunction:
    a = np.asarray(a, dtype=float)
    norm = float(np.linalg.norm(a))
    if norm == 0:
        raise ValueError("a linear test function needs a nonzero gradient")
    dim = a.size
    return SmoothTestFunction(
        "linear",
        lambda x: np.asarray(x) @ a + b,
        lambda x: np.broadcast_to(a, np.shape(x)).copy(),
        lambda x: np.zeros(np.shape(x)[:-1] + (dim, dim)),
        c_grad=norm,
        lambda_max=0.0,
    )


def radial(center: Sequence[float], rmin: float) -> SmoothTestFunction:
    """``|x - center|`` on ``{|x - center| >= rmin}``."""
    c = np.asarray(center, dtype=float)
    if not rmin > 0:
        raise ValueError("the radial test function needs rmin > 0")

    def grad(x):
        y = np.asarray(x) - c
        return y / np.linalg.norm(y, axis=-1, keepdims=True)

    def hess(x):
        y = np.asarray(x) - c
        r = np.linalg.norm(y, axis=-1)
        n = y / r[..., None]
        return (np.eye(c.size) - n[..., :, None] * n[..., None, :]) / r[..., None, None]

    return SmoothTestFunction("radial", lambda x: np.linalg.norm(np.asarray(x) - c, axis=-1),
                              grad, hess, c_grad=1.0, lambda_max=1.0 / rmin,
                              center=tuple(c), rmin=rmin)


def radial_quadratic(alpha: float, center: Sequence[float], rmin: float) -> SmoothTestFunction:
    """``alpha |x - center|^2`` on ``{|x - center| >= rmin}``."""
    c = np.asarray(center, dtype=float)
    if not (alpha > 0 and rmin > 0):
        raise ValueError("radial-quadratic needs alpha > 0 and rmin > 0")
    dim = c.size
    return SmoothTestFunction(
        "radial-quadratic",
        lambda x: alpha * np.sum((np.asarray(x) - c) ** 2, axis=-1),
        lambda x: 2 * alpha * (np.asarray(x) - c),
        lambda x: np.broadcast_to(2 * alpha * np.eye(dim), np.shape(x)[:-1] + (dim, dim)).copy(),
        c_grad=2 * alpha * rmin,
        lambda_max=2 * alpha,
        center=tuple(c),
        rmin=rmin,
    )


def parabolic(kappa: float) -> SmoothTestFunction:
    """``x_0 + kappa x_1^2 / 2`` in 2D: curved level sets, gradient at least 1."""

    def grad(x):
        x = np.asarray(x, dtype=float)
        return np.stack([np.ones(x.shape[:-1]), kappa * x[..., 1]], axis=-1)

    def hess(x):
        h = np.zeros(np.shape(x)[:-1] + (2, 2))
        h[..., 1, 1] = kappa
        return h

    return SmoothTestFunction("custom", lambda x: np.asarray(x)[..., 0] + 0.5 * kappa * np.asarray(x)[..., 1] ** 2,
                              grad, hess, c_grad=1.0, lambda_max=abs(kappa))


# ---------------------------------------------------------------------------
# argmax map and pushforward


def argmax_map(u: SmoothTestFunction, eps: float, x: Sequence[float]) -> np.ndarray:
    """Maximizer of ``u`` over the closed ball ``B(x, eps)``.

    The maximizer lies on the sphere; it is located by sampling the sphere and
    refining the stationarity condition with Newton's method.  The result is
    checked against the inverse relation ``x = y - eps n(y)``.
    """
    u.check(eps)
    x = np.asarray(x, dtype=float)
    dim = x.size
    if dim == 1:
        cand = np.array([x - eps, x + eps])
        y = cand[int(np.argmax(u.value(cand)))]
    elif dim == 2:
        y = _sphere_ascent_2d(u, eps, x)
    else:
        y = _sphere_ascent(u, eps, x)
    resid = float(np.linalg.norm(y - eps * u.normal(y) - x))
    if resid > 1e-8:
        raise RuntimeError(f"argmax inverse residual {resid:.2e} exceeds 1e-8")
    return y


def _sphere_ascent_2d(u: SmoothTestFunction, eps: float, x: np.ndarray) -> np.ndarray:
    th = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    ring = x + eps * np.stack([np.cos(th), np.sin(th)], axis=-1)
    t = float(th[int(np.argmax(u.value(ring)))])
    for _ in range(50):
        n = np.array([math.cos(t), math.sin(t)])
        tau = np.array([-n[1], n[0]])
        y = x + eps * n
        g = u.gradient(y)
        slope = eps * float(g @ tau)
        curv = eps * eps * float(tau @ u.hessian(y) @ tau) - eps * float(g @ n)
        if curv >= 0:
            break
        step = slope / curv
        t -= step
        if abs(step) < 1e-15:
            break
    return x + eps * np.array([math.cos(t), math.sin(t)])


def _sphere_ascent(u: SmoothTestFunction, eps: float, x: np.ndarray) -> np.ndarray:
    # projected fixed point y = x + eps n(y); contracting under admissibility
    y = x + eps * u.normal(x)
    for _ in range(200):
        nxt = x + eps * u.normal(y)
        if np.linalg.norm(nxt - y) < 1e-15:
            y = nxt
            break
        y = nxt
    return y


def _evaluation_points(u: SmoothTestFunction, eps: float, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    inner = inner_parallel(grid, 2 * eps).mask
    pts = grid.coords()
    mask = inner & u.valid(pts, margin=eps)
    if not mask.any():
        raise ValueError("no grid cell lies in the evaluation set")
    return mask, pts[mask]


def _densities(d: DensityPair):
    if d.analytic is None:
        raise ValueError("analytic density descriptors are required")
    return d.analytic


def pushforward_at(u: SmoothTestFunction, d: DensityPair, eps: float, y: np.ndarray) -> np.ndarray:
    """The pushforward subgradient at points ``y`` (shape ``(..., dim)``)."""
    an = _densities(d)
    y = np.asarray(y, dtype=float)
    n = u.normal(y)
    jac = u.normal_jacobian(y)
    eye = np.eye(y.shape[-1])
    det_back = np.abs(np.linalg.det(eye - eps * jac))
    det_fwd = np.abs(np.linalg.det(eye + eps * jac))
    r0_back, _ = an.values(y - eps * n)
    _, r1_fwd = an.values(y + eps * n)
    r0, r1 = an.values(y)
    return (r0_back * det_back - r0) / eps + (r1 - r1_fwd * det_fwd) / eps


def pushforward_subgradient(u: SmoothTestFunction, d: DensityPair, eps: float, grid: Grid) -> ScalarField:
    """Pushforward subgradient on the cells of the inner parallel set at ``2 eps``.

    The result lives on a grid whose domain mask is that inner set (further
    restricted to the evaluation set of ``u``).
    """
    u.check(eps)
    mask, pts = _evaluation_points(u, eps, grid)
    vals = np.full(grid.shape, np.nan)
    vals[mask] = pushforward_at(u, d, eps, pts)
    sub = Grid(grid.extent, grid.h, mask)
    return ScalarField(sub, vals)


def weighted_one_laplacian(u: SmoothTestFunction, d: DensityPair, x: np.ndarray) -> np.ndarray:
    """``-div(rho grad u / |grad u|)`` at ``x`` from analytic derivatives."""
    an = _densities(d)
    x = np.asarray(x, dtype=float)
    g = u.gradient(x)
    gn = np.linalg.norm(g, axis=-1)
    if np.any(gn < u.c_grad * (1 - 1e-9)) or np.any(gn == 0):
        raise ValueError("the gradient vanishes or drops below c_grad")
    n = g / gn[..., None]
    div_n = np.trace(u.normal_jacobian(x), axis1=-2, axis2=-1)
    r0, r1 = an.values(x)
    g0, g1 = an.gradients(x)
    return -(np.sum((g0 + g1) * n, axis=-1) + (r0 + r1) * div_n)


def consistency_defect(u: SmoothTestFunction, d: DensityPair, eps: float, grid: Grid) -> float:
    """Largest gap between the pushforward subgradient and the weighted 1-Laplacian."""
    p = pushforward_subgradient(u, d, eps, grid)
    mask = p.grid.omega
    lap = weighted_one_laplacian(u, d, grid.coords()[mask])
    return float(np.max(np.abs(p.values[mask] - lap)))


def determinant_remainder(u: SmoothTestFunction, eps: float, x: np.ndarray) -> np.ndarray:
    """``|det grad(y - eps n(y))| - (1 - eps div n(y))`` at points ``x``."""
    x = np.asarray(x, dtype=float)
    jac = u.normal_jacobian(x)
    eye = np.eye(x.shape[-1])
    det = np.abs(np.linalg.det(eye - eps * jac))
    return det - (1 - eps * np.trace(jac, axis1=-2, axis2=-1))


def loglog_slope(eps_list: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of ``log values`` against ``log eps``."""
    le = np.log(np.asarray(eps_list, dtype=float))
    lv = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(le, lv, 1)[0])


# ---------------------------------------------------------------------------
# cone barrier


@dataclass(frozen=True)
class ConeBarrier:
    """Raised cone ``C1 sqrt(eps)`` near ``x0`` that rejoins ``|x - x0|`` further out."""

    x0: tuple[float, ...]
    eps: float
    c1: float
    c2: float

    def __post_init__(self):
        if not (self.c2 >= 1 and self.c2 < self.c1 <= 2 * self.c2):
            raise ValueError(f"constants must satisfy 1 <= C2 < C1 <= 2 C2, got C1={self.c1}, C2={self.c2}")


def cone_barrier_eval(b: ConeBarrier, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x - np.asarray(b.x0), axis=-1)
    se = math.sqrt(b.eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = r + b.c2 * (b.c1 - b.c2) * b.eps / r
    return np.where(r <= b.c2 * se, b.c1 * se, outer)


def _barrier_values(r: np.ndarray, eps: float, c1: float, c2: float) -> np.ndarray:
    se = math.sqrt(eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r <= c2 * se, c1 * se, r + c2 * (c1 - c2) * eps / r)


def fit_cone(r: np.ndarray, w: np.ndarray, eps: float, slack: float, c2_max: float = 20.0,
             c2_steps: int = 400) -> tuple[float, float] | None:
    """Smallest ``C1`` (then ``C2``) with ``w <= barrier + slack`` at distances ``r``.

    Scans ``C2`` over ``[1, c2_max]`` and bisects ``C1`` in ``(C2, 2 C2]``; the
    barrier increases with ``C1`` at fixed ``C2``.
    """
    best = None
    for c2 in np.linspace(1.0, c2_max, c2_steps):
        ok = lambda c1: bool(np.all(w <= _barrier_values(r, eps, c1, c2) + slack))  # noqa: E731
        if not ok(2 * c2):
            continue
        lo, hi = c2, 2 * c2
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                hi = mid
            else:
                lo = mid
        if best is None or hi < best[0] - 1e-12:
            best = (hi, float(c2))
    return best


@dataclass
class BarrierFit:
    eps: float
    c1: float | None
    c2: float | None
    slack: float
    sign: str
    solver_gap: float
    converged: bool


@dataclass
class BarrierReport:
    fits: list[BarrierFit]

    @property
    def c1_values(self) -> list[float]:
        return [f.c1 for f in self.fits if f.c1 is not None]

    @property
    def bounded(self) -> bool:
        """Fitted ``C1`` within a factor 2 across the sweep, per sign."""
        for sign in {f.sign for f in self.fits}:
            vals = [f.c1 for f in self.fits if f.sign == sign]
            if any(v is None for v in vals) or max(vals) > 2 * min(vals):
                return False
        return True


def fit_barrier_constants(d_for: Callable[[float], DensityPair], grid_for: Callable[[float], Grid],
                          eps_list: Sequence[float], x0: Sequence[float] | None = None,
                          solve_cfg: Callable[[float], object] | None = None,
                          negative: bool = True) -> tuple[float | None, float | None, BarrierReport]:
    """Fit cone-barrier constants over an eps sweep.

    ``grid_for(eps)`` and ``d_for(grid)`` build the (convex) domain and the
    densities for each eps.  For each eps the cone data ``|x - x0|`` is solved
    and the smallest admissible ``(C1, C2)`` with ``u <= barrier + slack`` is
    fitted, ``slack`` being the certified cellwise solver error.  With
    ``negative`` the mirrored instance ``-|x - x0|`` is fitted against ``-u``;
    it is the positive instance with the two densities swapped.  Returns the largest fitted ``C1`` and its ``C2``
    over the sweep (``None`` if some fit failed) and the full report.
    """
    from .solver import SolveConfig, solve

    fits = []
    for eps in eps_list:
        g = grid_for(eps)
        d = d_for(g)
        pts = g.coords()
        c = np.zeros(g.dim) if x0 is None else np.asarray(x0, dtype=float)
        r = np.linalg.norm(pts - c, axis=-1)
        cfg = solve_cfg(eps) if solve_cfg is not None else SolveConfig(eps)
        cases = [("positive", d, 1.0)] + ([("negative", d, -1.0)] if negative else [])
        for sign, dens, s in cases:
            data = ScalarField(g, np.where(g.omega, s * r, np.nan))
            w, rep = solve(data, dens, cfg)
            om = g.omega
            slack = rep.linf_slack
            fit = fit_cone(r[om], s * w.values[om], eps, slack)
            fits.append(BarrierFit(eps, *(fit if fit else (None, None)), slack, sign,
                                   rep.certified_gap, rep.converged))
    report = BarrierReport(fits)
    if any(f.c1 is None for f in fits):
        return None, None, report
    worst = max(fits, key=lambda f: f.c1)
    return worst.c1, worst.c2, report


# ---------------------------------------------------------------------------
# radial flow oracle and set metrics


def extinction_time(rho_spec: str, r0: float, n_dim: int = 2, a: float = 0.0) -> float:
    """Time at which the radial solution reaches radius zero (``inf`` if never)."""
    s0 = r0 * r0
    if rho_spec == "constant" or a == 0.0:
        return s0 / (2 * (n_dim - 1)) if n_dim > 1 else math.inf
    if rho_spec != "radial-exp":
        raise ValueError(f"unknown density family {rho_spec!r}")
    c = (n_dim - 1) / a
    if c == 0 or abs(s0 + c) <= 1e-12 * max(s0, abs(c)):
        # the stationary radius sqrt(-c) never moves
        return math.inf
    ratio = c / (s0 + c)
    if not ratio > 0:
        return math.inf
    t = -math.log(ratio) / (2 * a)
    return t if t > 0 else math.inf


def radial_flow_oracle(rho_spec: str, r0: float, t: float, n_dim: int = 2, a: float = 0.0) -> float:
    """Radius at time ``t`` of the ball evolving by weighted mean curvature.

    ``rho_spec`` is ``"constant"`` or ``"radial-exp"`` (density ``exp(a |x|^2 / 2)``).
    Raises :class:`Extinct` at or after the extinction time.
    """
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    t_ext = extinction_time(rho_spec, r0, n_dim, a)
    if t >= t_ext:
        raise Extinct(t_ext)
    if rho_spec == "constant" or a == 0.0:
        s = r0 * r0 - 2 * (n_dim - 1) * t
    else:
        c = (n_dim - 1) / a
        s = (r0 * r0 + c) * math.exp(-2 * a * t) - c
    return math.sqrt(max(s, 0.0))


def hausdorff_distance(a: Region, b: Region) -> float:
    """Hausdorff distance between two cell sets, measured centre to centre."""
    if a.is_empty() or b.is_empty():
        raise ValueError("the Hausdorff distance needs two nonempty regions")
    da = edt(a).values
    db = edt(b).values
    return float(max(np.max(db[a.mask]), np.max(da[b.mask])))


def symdiff_volume(a: Region, b: Region) -> float:
    if a.grid.shape != b.grid.shape:
        raise ValueError("regions live on different grids")
    return a.grid.cell_volume * int(np.count_nonzero(a.mask != b.mask))


def disk_region(grid: Grid, radius: float, center: Sequence[float] | None = None) -> Region:
    """Cells whose centres lie strictly inside the given ball."""
    c = np.zeros(grid.dim) if center is None else np.asarray(center, dtype=float)
    r = np.linalg.norm(grid.coords() - c, axis=-1)
    return Region(grid, grid.omega & (r < radius))
