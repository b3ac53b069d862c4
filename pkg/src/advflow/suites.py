"""Property batteries shared by ``advflow verify`` and the acceptance tests.

Each suite returns a :class:`SuiteResult` holding one :class:`Check` per
property, with the measured value, the tolerance it was held to and the
outcome.  ``scale`` shrinks the instance counts for quick runs; the default of
1 runs the full batteries.
"""

from __future__ import annotations

import itertools
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import analysis as an
from .density import DensityPair, analytic_density, from_arrays
from .functional import atw_energy, coarea_check, submodularity_gap, tv_eps
from .grid import Grid, Region, ScalarField, build_grid
from .scheme import SchemeConfig, SolverFailure, extract_radius, one_step, run_flow, selection_oracle
from .solver import NonConvergenceWarning, SolveConfig, solve


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""


@dataclass
class SuiteResult:
    suite: str
    checks: list[Check] = field(default_factory=list)
    seconds: float = 0.0
    data: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, measured: float, tolerance: float, detail: str = "") -> Check:
        c = Check(name, bool(passed), float(measured), float(tolerance), detail)
        self.checks.append(c)
        return c

    def to_dict(self) -> dict:
        return {"suite": self.suite, "passed": self.passed, "seconds": self.seconds,
                "checks": [asdict(c) for c in self.checks], "data": self.data}


def _count(n: int, scale: float) -> int:
    return max(1, int(round(n * scale)))


def _random_density(grid: Grid, rng: np.random.Generator, lo: float = 0.2, hi: float = 1.0) -> DensityPair:
    r0 = rng.uniform(lo, hi, grid.shape)
    r1 = rng.uniform(lo, hi, grid.shape)
    return from_arrays(grid, r0, r1)


# ---------------------------------------------------------------------------
# functional


def coarea_suite(n: int = 50, seed: int = 0, scale: float = 1.0) -> SuiteResult:
    """TV of quantized fields against the level-set sum of perimeters, 32x32 grids."""
    t0 = time.perf_counter()
    res = SuiteResult("coarea")
    rng = np.random.default_rng(seed)
    g = build_grid(((0, 1), (0, 1)), 1 / 32)
    worst = 0.0
    for _ in range(_count(n, scale)):
        levels = rng.integers(2, 8)
        vals = rng.integers(0, levels, g.shape) * rng.uniform(0.1, 1.0) + rng.normal()
        u = ScalarField(g, vals.astype(float))
        d = _random_density(g, rng)
        eps = g.h * float(rng.choice([1.0, 1.5, 2.0, 3.0]))
        total = tv_eps(u, d, eps).total
        worst = max(worst, coarea_check(u, d, eps) / max(total, 1e-300))
    res.add("relative coarea defect", worst <= 1e-10, worst, 1e-10)
    res.seconds = time.perf_counter() - t0
    return res


def submodularity_suite(n: int = 1000, seed: int = 0, scale: float = 1.0) -> SuiteResult:
    """``TV(u) + TV(v) - TV(u v v) - TV(u ^ v)`` on random 16x16 pairs."""
    t0 = time.perf_counter()
    res = SuiteResult("submodularity")
    rng = np.random.default_rng(seed)
    g = build_grid(((0, 1), (0, 1)), 1 / 16)
    worst = math.inf
    for i in range(_count(n, scale)):
        a = rng.normal(size=g.shape)
        # independent pairs, ordered pairs (gap exactly zero) and sparse perturbations
        kind = i % 3
        if kind == 0:
            b = rng.normal(size=g.shape)
        elif kind == 1:
            b = a + np.abs(rng.normal(size=g.shape))
        else:
            b = a + np.where(rng.random(g.shape) < 0.05, rng.normal(size=g.shape), 0.0)
        u, v = ScalarField(g, a), ScalarField(g, b)
        d = _random_density(g, rng)
        eps = g.h * float(rng.choice([1.0, 1.5, 2.0, 2.5]))
        worst = min(worst, submodularity_gap(u, v, d, eps))
    res.add("smallest submodularity gap", worst >= -1e-12, worst, -1e-12)
    res.seconds = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------------------
# solver


def _energy_1d(u: np.ndarray, dvals: np.ndarray, r0: np.ndarray, r1: np.ndarray, h: float,
               eps: float) -> np.ndarray:
    """One-step energy of a batch of 1D fields (last axis = cells), by direct windows."""
    n = dvals.size
    reach = int(math.floor(eps / h * (1 + 1e-12)))
    fid = h / (2 * eps) * np.sum((r0 + r1) * (u - dvals) ** 2, axis=-1)
    tv = np.zeros(u.shape[:-1])
    for i in range(n):
        lo, hi = max(0, i - reach), min(n, i + reach + 1)
        win = u[..., lo:hi]
        tv += r0[i] * (win.max(axis=-1) - u[..., i]) + r1[i] * (u[..., i] - win.min(axis=-1))
    return fid + h / eps * tv


def lattice_oracle(dvals, r0, r1, h: float, eps: float, lo: float = -1.0, hi: float = 2.0,
                   step: float = 0.1, refinements: int = 2) -> tuple[np.ndarray, float, float]:
    """Exhaustive minimization over a value lattice, refined around the best point.

    Returns the best point, its energy and the final lattice spacing.
    """
    dvals, r0, r1 = (np.asarray(a, dtype=float) for a in (dvals, r0, r1))
    n = dvals.size
    axis = np.arange(lo, hi + step / 2, step)
    pts = np.array(list(itertools.product(axis, repeat=n)))
    e = _energy_1d(pts, dvals, r0, r1, h, eps)
    best = pts[int(np.argmin(e))]
    for _ in range(refinements):
        step /= 10
        local = np.arange(-10, 11) * step
        pts = best + np.array(list(itertools.product(local, repeat=n)))
        e = _energy_1d(pts, dvals, r0, r1, h, eps)
        best = pts[int(np.argmin(e))]
    return best, float(e.min()), step


def solver_suite(n: int = 100, seed: int = 0, scale: float = 1.0) -> SuiteResult:
    """Lattice oracle, the L-infinity bound and the two-start uniqueness probe."""
    t0 = time.perf_counter()
    res = SuiteResult("solver")
    # 4-cell instance with eps = 2h and equal constant densities
    g = build_grid(((0, 1),), 0.25)
    d = analytic_density("constant", (0.5, 0.5), g)
    dvals = np.array([0.0, 1.0, 1.0, 0.0])
    eps = 0.5
    w, rep = solve(ScalarField(g, dvals), d, SolveConfig(eps))
    best, e_best, res_step = lattice_oracle(dvals, d.rho0, d.rho1, g.h, eps)
    err = float(np.max(np.abs(w.values - best)))
    res.add("lattice oracle agreement", rep.converged and err <= res_step, err, res_step,
            f"solve {np.round(w.values, 6).tolist()} lattice {np.round(best, 6).tolist()}")
    res.add("solve energy not above lattice minimum", rep.energy <= e_best + rep.tol_gap,
            rep.energy - e_best, rep.tol_gap)

    rng = np.random.default_rng(seed)
    worst = -math.inf
    unconverged = 0
    for _ in range(_count(n, scale)):
        size = int(rng.integers(8, 17))
        g = build_grid(((0, 1), (0, 1)), 1 / size)
        d = _random_density(g, rng)
        data = ScalarField(g, rng.normal(scale=rng.uniform(0.1, 2.0), size=g.shape))
        eps = g.h * float(rng.choice([1.0, 1.5, 2.0, 3.0]))
        w, rep = solve(data, d, SolveConfig(eps))
        unconverged += not rep.converged
        worst = max(worst, w.sup_norm() - data.sup_norm())
    res.add("L-infinity bound", worst <= 1e-12, worst, 1e-12)
    res.add("random instances certified", unconverged == 0, unconverged, 0)

    g = build_grid(((0, 1), (0, 1)), 1 / 24)
    d = analytic_density("radial-exp", (-2.0, 0.7, 0.3), g)
    x = g.coords()
    data = ScalarField(g, np.sin(6 * x[..., 0]) * np.cos(4 * x[..., 1]))
    eps = 2.5 * g.h
    sols = []
    for s in (1, 2):
        w, rep = solve(data, d, SolveConfig(eps, seed=s), init="random")
        sols.append((w, rep))
    (w1, r1), (w2, r2) = sols
    dist = float(np.linalg.norm(w1.inside() - w2.inside()))
    bound = 2 * math.sqrt(2 * max(r1.tol_gap, r2.tol_gap) / r1.mu)
    res.add("two-start uniqueness", r1.converged and r2.converged and dist <= bound, dist, bound)
    res.seconds = time.perf_counter() - t0
    return res


def _smooth_random_field(g: Grid, rng: np.random.Generator, terms: int = 6) -> np.ndarray:
    x = g.coords()
    out = np.zeros(g.shape)
    for _ in range(terms):
        k = rng.normal(scale=6.0, size=2)
        out += rng.normal(scale=0.3) * np.sin(x @ k + rng.uniform(0, 2 * np.pi))
    return out


def comparison_suite(n: int = 50, seed: int = 0, scale: float = 1.0, max_iters: int = 10000) -> SuiteResult:
    """Ordered data give ordered solutions up to the certified cellwise slack (64x64)."""
    t0 = time.perf_counter()
    res = SuiteResult("comparison")
    rng = np.random.default_rng(seed)
    g = build_grid(((0, 1), (0, 1)), 1 / 64)
    hard = 0
    worst = -math.inf
    unconverged = 0
    spec_slack = math.inf
    for _ in range(_count(n, scale)):
        d = analytic_density("two-bump", {"centers": ((0.3, 0.3), (0.7, 0.6)), "widths": (0.2, 0.25),
                                          "amplitudes": tuple(rng.uniform(0.2, 1.0, 2)),
                                          "base": 0.2}, g)
        hi = _smooth_random_field(g, rng)
        lo = hi - np.abs(_smooth_random_field(g, rng)) - rng.uniform(0, 0.05, g.shape)
        eps = g.h * float(rng.choice([1.5, 2.0, 3.0]))
        cfg = SolveConfig(eps, max_iters=max_iters)
        u, ru = solve(ScalarField(g, hi), d, cfg)
        v, rv = solve(ScalarField(g, lo), d, cfg)
        unconverged += (not ru.converged) + (not rv.converged)
        slack = ru.linf_slack + rv.linf_slack
        excess = float(np.max(v.inside() - u.inside()))
        worst = max(worst, excess - slack)
        hard += int(np.sum(v.inside() - u.inside() > slack))
        spec_slack = min(spec_slack, 2 * math.sqrt(2 * ru.tol_gap / ru.mu) / g.h)
    res.add("hard ordering violations", hard == 0 and unconverged == 0, hard, 0,
            f"unconverged solves {unconverged}")
    res.add("largest excess over the certified slack", worst <= 0, worst, 0.0)
    res.data["slack_formula_bound"] = spec_slack
    res.seconds = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------------------
# scheme


def _random_blob(g: Grid, rng: np.random.Generator, k: int) -> np.ndarray:
    x = g.coords()
    m = np.zeros(g.shape, dtype=bool)
    for _ in range(k):
        c = rng.uniform(0.2, 0.8, 2)
        m |= np.linalg.norm(x - c, axis=-1) < rng.uniform(0.08, 0.25)
    return m


def monotone_suite(n: int = 20, seed: int = 0, scale: float = 1.0, max_iters: int = 10000) -> SuiteResult:
    """Nested inputs give nested outputs outside the uncertain cells (64x64)."""
    t0 = time.perf_counter()
    res = SuiteResult("monotone")
    rng = np.random.default_rng(seed)
    g = build_grid(((0, 1), (0, 1)), 1 / 64)
    hard = 0
    flagged = 0
    failures = 0
    for _ in range(_count(n, scale)):
        d = analytic_density("axis-exp", (rng.uniform(-1.5, 1.5), 0.5, 0.5, int(rng.integers(0, 2))), g)
        big = _random_blob(g, rng, int(rng.integers(2, 5)))
        small = big & ~_random_blob(g, rng, int(rng.integers(1, 4)))
        if not small.any():
            small = big.copy()
            small[np.argwhere(big)[0][0], :] = False
        eps = g.h * float(rng.choice([2.0, 3.0, 4.0]))
        cfg = SchemeConfig(eps, eps, SolveConfig(eps, max_iters=max_iters, stop_on_set=False, coarse_levels=1))
        try:
            sa, ra = one_step(Region(g, big), d, cfg)
            sb, rb = one_step(Region(g, small), d, cfg)
        except SolverFailure:
            failures += 1
            continue
        unsure = ra.uncertain.mask | rb.uncertain.mask
        escape = sb.mask & ~sa.mask
        hard += int(np.sum(escape & ~unsure))
        flagged += int(np.sum(escape & unsure))
    res.add("hard containment violations", hard == 0 and failures == 0, hard, 0,
            f"flagged {flagged}, uncertified steps {failures}")
    res.seconds = time.perf_counter() - t0
    return res


def selection_suite(n: int = 10, seed: int = 0, scale: float = 1.0, max_iters: int = 10000) -> SuiteResult:
    """The computed step against exhaustive enumeration on 2x2, 3x3 and 4x4 grids."""
    t0 = time.perf_counter()
    res = SuiteResult("selection")
    rng = np.random.default_rng(seed)
    worst = -math.inf
    route = 0.0
    cases = 0

    def compare(a: Region, d: DensityPair, eps: float) -> None:
        nonlocal worst, route, cases
        cfg = SchemeConfig(eps, eps, SolveConfig(eps, max_iters=max_iters, stop_on_set=False, coarse_levels=1))
        out, rep = one_step(a, d, cfg)
        best_region, best = selection_oracle(a, d, cfg)
        mine = atw_energy(out, a, d, eps)
        worst = max(worst, mine - best - max(rep.set_gap, 0.0))
        route = max(route, abs(atw_energy(best_region, a, d, eps) - best) / max(abs(best), 1.0))
        cases += 1

    # 2x2 grid, equal constant densities, left column, eps = 2h
    g = build_grid(((0, 1), (0, 1)), 0.5)
    d = analytic_density("constant", (0.5, 0.5), g)
    left = np.zeros(g.shape, dtype=bool)
    left[0, :] = True
    compare(Region(g, left), d, 2 * g.h)
    # a single cell with a window covering the grid: the empty set wins
    g4 = build_grid(((0, 1), (0, 1)), 0.25)
    d4 = analytic_density("constant", (0.5, 0.5), g4)
    one = np.zeros(g4.shape, dtype=bool)
    one[1, 1] = True
    a1 = Region(g4, one)
    cfg = SchemeConfig(8 * g4.h, 8 * g4.h, SolveConfig(8 * g4.h, stop_on_set=False))
    oracle_empty = selection_oracle(a1, d4, cfg)[0].is_empty()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        compare(a1, d4, 8 * g4.h)
    res.add("tiny region with a huge window vanishes", oracle_empty, float(oracle_empty), 1.0)

    for size in (2, 3, 4):
        g = build_grid(((0, 1), (0, 1)), 1 / size)
        for _ in range(_count(n, scale)):
            mask = rng.random(g.shape) < 0.5
            if mask.all() or not mask.any():
                mask.flat[0] = not mask.flat[0]
            d = _random_density(g, rng)
            eps = g.h * float(rng.choice([1.0, 1.5, 2.0]))
            a = Region(g, mask)
            compare(a, d, eps)
            # the oracle minimizer as input: re-running returns a no-worse step
            nxt = selection_oracle(a, d, SchemeConfig(eps, eps, SolveConfig(eps)))[0]
            if not (nxt.is_empty() or nxt.is_full()):
                compare(nxt, d, eps)
    res.add("step energy above the exhaustive minimum (minus tol_select)", worst <= 1e-12, worst, 1e-12,
            f"{cases} cases")
    res.add("enumeration agrees with the movement energy", route <= 1e-12, route, 1e-12)
    res.seconds = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------------------
# analysis


def _cone_grid(eps: float, width: float) -> Grid:
    """Square ``[-w, w]^2`` with ``w = width sqrt(eps)`` rounded to the spacing ``eps / 8``."""
    h = eps / 8
    w = h * max(1, round(width * math.sqrt(eps) / h))
    return build_grid(((-w, w),) * 2, h)


def _cone_config(eps: float, max_iters: int, coarse_iters: int) -> SolveConfig:
    return SolveConfig(eps, max_iters=max_iters, coarse_levels=2, coarse_iters=coarse_iters)


def barrier_suite(eps_list=(0.08, 0.04, 0.02), scale: float = 1.0, width: float = 2.5,
                  max_iters: int = 120, coarse_iters: int = 150) -> SuiteResult:
    """Cone-barrier constants fitted across the eps sweep (h = eps/8).

    The domain is the square of half-width ``width sqrt(eps)`` centred on the
    cone tip, so the capped part of the barrier takes the same share of it at
    every eps.  Constant and radial-exponential densities are both fitted.
    The fits absorb the certified cellwise solver error whatever it is; a
    separate check reports whether every solve met its gap target.
    """
    t0 = time.perf_counter()
    res = SuiteResult("barrier")
    eps_list = list(eps_list)
    cfg_for = lambda eps: _cone_config(eps, max_iters, coarse_iters)  # noqa: E731
    families = {"constant": lambda g: analytic_density("constant", (0.5, 0.5), g),
                "exponential": lambda g: analytic_density("radial-exp", (-1.0, 0.6, 0.4), g)}
    uncertified = []
    for name, d_for in families.items():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergenceWarning)
            c1, c2, rep = an.fit_barrier_constants(d_for, lambda e: _cone_grid(e, width), eps_list,
                                                   solve_cfg=cfg_for)
        res.data[name] = [asdict(f) for f in rep.fits]
        vals = rep.c1_values
        ratio = max(vals) / min(vals) if vals and len(vals) == len(rep.fits) else math.inf
        slack = [round(f.slack / math.sqrt(f.eps), 3) for f in rep.fits]
        res.add(f"{name}: C1 spread across eps", rep.bounded, ratio, 2.0,
                f"C1 {[round(v, 3) for v in vals]}, slack / sqrt(eps) {slack}")
        order_ok = all(f.c1 is not None and 1 <= f.c2 < f.c1 <= 2 * f.c2 for f in rep.fits)
        res.add(f"{name}: 1 <= C2 < C1 <= 2 C2 satisfiable", order_ok, float(order_ok), 1.0)
        uncertified += [f"{name}/{f.sign}/eps={f.eps}" for f in rep.fits if not f.converged]
    res.add("every cone solve certified", not uncertified, len(uncertified), 0,
            "uncertified: " + ", ".join(uncertified) if uncertified else "")
    res.seconds = time.perf_counter() - t0
    return res


def _battery(grid: Grid):
    """The three (test function, density) pairs of the consistency check."""
    return [
        ("linear / axis-exp", an.linear((0.8, 0.6)),
         analytic_density("axis-exp", (0.7, 0.6, 0.4, 1), grid)),
        ("radial / radial-exp", an.radial((0.0, 0.0), 0.35),
         analytic_density("radial-exp", (-1.5, 0.5, 0.5), grid)),
        ("parabolic / two-bump", an.parabolic(1.5),
         analytic_density("two-bump", {"centers": ((-0.3, 0.2), (0.4, -0.3)), "widths": (0.5, 0.6),
                                       "amplitudes": (0.8, 0.5), "base": 0.3}, grid)),
    ]


def consistency_suite(eps_list=(0.08, 0.04, 0.02, 0.01), scale: float = 1.0) -> SuiteResult:
    """Pushforward subgradient against the weighted 1-Laplacian, and the determinant slope."""
    t0 = time.perf_counter()
    res = SuiteResult("consistency")
    g = build_grid(((-1, 1), (-1, 1)), 0.02)
    for name, u, d in _battery(g):
        defects = [an.consistency_defect(u, d, eps, g) for eps in eps_list]
        dec = all(b < a for a, b in zip(defects, defects[1:]))
        res.add(f"{name}: sup-defect strictly decreasing", dec, defects[-1], defects[0],
                "defects " + ", ".join(f"{v:.4g}" for v in defects))
        res.data[name] = defects
    # in the plane the determinant is exactly affine in eps, so the remainder is probed in 3D
    u3 = an.radial((0.0, 0.0, 0.0), 0.2)
    x = np.array([[0.5, 0.2, -0.3], [0.1, -0.6, 0.4], [-0.4, 0.4, 0.4]])
    sweep = [0.04, 0.02, 0.01, 0.005]
    rem = [float(np.max(np.abs(an.determinant_remainder(u3, e, x)))) for e in sweep]
    slope = an.loglog_slope(sweep, rem)
    res.add("determinant Taylor remainder slope", slope >= 1.9, slope, 1.9,
            "remainders " + ", ".join(f"{v:.3g}" for v in rem))
    res.seconds = time.perf_counter() - t0
    return res


def lipschitz_constant(u: ScalarField, eps: float, max_pairs: int = 4_000_000,
                       seed: int = 0) -> float:
    """Smallest ``C`` with ``|u(x) - u(y)| <= |x - y| + C sqrt(eps)`` over cell pairs.

    All pairs are used when there are at most ``max_pairs``; otherwise a
    seeded random subset of that size.
    """
    om = u.grid.omega
    vals = u.values[om]
    pts = u.grid.coords()[om]
    n = vals.size
    rng = np.random.default_rng(seed)
    if n * (n - 1) // 2 <= max_pairs:
        i, j = np.triu_indices(n, 1)
    else:
        i = rng.integers(0, n, max_pairs)
        j = rng.integers(0, n, max_pairs)
    best = 0.0
    for s in range(0, i.size, 1_000_000):
        a, b = i[s:s + 1_000_000], j[s:s + 1_000_000]
        gap = np.abs(vals[a] - vals[b]) - np.linalg.norm(pts[a] - pts[b], axis=-1)
        best = max(best, float(gap.max()))
    return best / math.sqrt(eps)


def lipschitz_suite(eps_list=(0.08, 0.04, 0.02), scale: float = 1.0, width: float = 2.5,
                    max_iters: int = 200, coarse_iters: int = 150) -> SuiteResult:
    """Almost-Lipschitz constant of the minimizer for cone data, across the eps sweep.

    Same domains and solver settings as the barrier suite.
    """
    t0 = time.perf_counter()
    res = SuiteResult("lipschitz")
    cs = []
    raw = []
    uncertified = []
    for eps in eps_list:
        g = _cone_grid(eps, width)
        d = analytic_density("constant", (0.5, 0.5), g)
        r = np.linalg.norm(g.coords(), axis=-1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergenceWarning)
            w, rep = solve(ScalarField(g, r), d, _cone_config(eps, max_iters, coarse_iters))
        if not rep.converged:
            uncertified.append(f"eps={eps} (slack {rep.linf_slack / g.h:.3g} h)")
        # the certified cellwise error enters each difference twice
        raw.append(lipschitz_constant(w, eps))
        cs.append(raw[-1] + 2 * rep.linf_slack / math.sqrt(eps))
    ratio = max(cs) / min(cs) if min(cs) > 0 else math.inf
    res.add("almost-Lipschitz constant spread across eps", ratio <= 2, ratio, 2.0,
            f"C {[round(c, 4) for c in cs]}, without the solver slack {[round(c, 4) for c in raw]}")
    res.add("every cone solve certified", not uncertified, len(uncertified), 0, ", ".join(uncertified))
    res.data["C"] = cs
    res.seconds = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------------------
# flow


@dataclass
class FlowLeg:
    """One shrinking-disk run, measured at the probe time.

    ``certified`` is False when the measurement comes from an uncertified
    step; the values are then diagnostics only.
    """

    eps: float
    radius: float
    hausdorff: float
    symdiff: float
    extinction_time: float | None
    certified: bool
    failure: str | None
    seconds: float


def _disk_leg(eps: float, total_time: float, t_probe: float, r0: float, max_iters: int,
              coarse_iters: int) -> FlowLeg:
    g = build_grid(((-1, 1), (-1, 1)), eps / 8)
    d = analytic_density("constant", (0.5, 0.5), g)
    solve_cfg = SolveConfig(eps, max_iters=max_iters, coarse_levels=1, coarse_iters=coarse_iters)
    t0 = time.perf_counter()
    trace = run_flow(an.disk_region(g, r0), d, SchemeConfig(eps, total_time, solve_cfg))
    k_probe = int(math.floor(t_probe / eps + 1e-9))
    certified = trace.failed_at is None or trace.failed_at > k_probe
    region = trace.region_at(t_probe) if certified else trace.failed_region
    ref = an.disk_region(g, an.radial_flow_oracle("constant", r0, t_probe))
    radius = 0.0 if region.is_empty() else extract_radius(region)[0]
    haus = math.inf if region.is_empty() else an.hausdorff_distance(region, ref)
    if trace.extinct_at is not None:
        t_ext = trace.extinct_at * eps
    elif trace.failed_at is not None and trace.failed_region.is_empty():
        t_ext = trace.failed_at * eps
        certified = False
    else:
        t_ext = None
    certified &= trace.failed_at is None
    return FlowLeg(eps, radius, haus, an.symdiff_volume(region, ref), t_ext, certified, trace.failure,
                   time.perf_counter() - t0)


def flow_suite(eps_list=(0.08, 0.04, 0.02), scale: float = 1.0, max_iters: int = 400,
               coarse_iters: int = 300, stationary_eps: float = 0.02, stationary_h_ratio: float = 4.0,
               stationary_half_width: float = 0.5, stationary_steps: int = 10,
               stationary_iters: int = 1500, drift_constant: float = 1.0,
               on_leg: Callable[[str], None] | None = None) -> SuiteResult:
    """Shrinking disk against the radial oracle, extinction, and the stationary disk.

    Disk legs run on ``[-1, 1]^2`` with ``h = eps / 8`` and stop at the first
    uncertified step; the finest leg continues to ``1.5`` times the oracle
    extinction time.  The stationary run keeps going through uncertified
    steps so that its radii can be reported, but only passes if every step
    is certified.
    """
    t0 = time.perf_counter()
    res = SuiteResult("flow")
    r0, t_probe = 0.3, 0.02
    t_ext = an.extinction_time("constant", r0)
    legs = []
    for eps in eps_list:
        horizon = 1.5 * t_ext if eps == min(eps_list) else t_probe
        leg = _disk_leg(eps, horizon, t_probe, r0, max_iters, coarse_iters)
        legs.append(leg)
        if on_leg is not None:
            on_leg(f"disk leg {leg}")
    res.data["legs"] = [asdict(leg) for leg in legs]
    fine = legs[-1]
    target = an.radial_flow_oracle("constant", r0, t_probe)
    rel = abs(fine.radius - target) / target
    res.add(f"radius at t={t_probe} within 10% of the oracle", rel <= 0.10 and fine.certified, rel, 0.10,
            f"measured {fine.radius:.4f}, oracle {target:.4f}, certified {fine.certified}")
    all_cert = all(leg.certified for leg in legs)
    haus = [leg.hausdorff for leg in legs]
    sym = [leg.symdiff for leg in legs]
    dec = lambda v: all(b < a for a, b in zip(v, v[1:]))  # noqa: E731
    res.add("Hausdorff error decreasing in eps", dec(haus) and all_cert, haus[-1], haus[0],
            "errors " + ", ".join(f"{v:.4g}" for v in haus) + f", certified {all_cert}")
    res.add("symmetric-difference error decreasing in eps", dec(sym) and all_cert, sym[-1], sym[0],
            "errors " + ", ".join(f"{v:.4g}" for v in sym) + f", certified {all_cert}")
    ext = fine.extinction_time
    rel_ext = math.inf if ext is None else abs(ext - t_ext) / t_ext
    res.add("extinction time within 25% of the oracle", rel_ext <= 0.25 and fine.certified, rel_ext, 0.25,
            f"measured {ext}, oracle {t_ext:.4f}, certified {fine.certified}")

    # stationary disk: the density drift balances the curvature at radius r0
    eps = stationary_eps
    g = build_grid(((-stationary_half_width, stationary_half_width),) * 2, eps / stationary_h_ratio)
    d = analytic_density("radial-exp", (-1.0 / r0**2, 0.5, 0.5), g)
    cfg = SchemeConfig(eps, stationary_steps * eps,
                       SolveConfig(eps, max_iters=stationary_iters, coarse_levels=1),
                       require_certificate=False)
    trace = run_flow(an.disk_region(g, r0), d, cfg)
    radii = [s.metrics["radius"] for s in trace.steps]
    drift = max((abs(r - r0) if math.isfinite(r) else math.inf) for r in radii)
    bound = drift_constant * (math.sqrt(eps) + g.h)
    certified = all(s.report is None or s.report.certified for s in trace.steps)
    complete = len(trace.steps) == stationary_steps + 1
    res.add(f"stationary disk drift over {stationary_steps} steps", drift <= bound and certified and complete,
            drift, bound, f"radii {[round(r, 4) for r in radii]}, certified {certified}, "
            f"steps {len(trace.steps) - 1}")
    res.data["stationary_radii"] = radii
    res.seconds = time.perf_counter() - t0
    return res


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "coarea": coarea_suite,
    "submodularity": submodularity_suite,
    "solver": solver_suite,
    "comparison": comparison_suite,
    "monotone": monotone_suite,
    "selection": selection_suite,
    "barrier": barrier_suite,
    "consistency": consistency_suite,
    "lipschitz": lipschitz_suite,
    "flow": flow_suite,
}
