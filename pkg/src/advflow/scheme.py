"""The one-step operator, the iterated flow and the exhaustive selection oracle.

One step maps a region ``A`` to the strict superlevel set ``{w > 0}`` of the
minimizer ``w`` of the one-step energy with data ``sdist(., complement of A)``.

Only the sign of ``w`` matters, which allows an optional cheaper solve.
Write ``F(E) = TV(1_E) - (h^N / eps) sum_E rho d`` for the thresholding problem
whose minimal solution is ``{w > 0}``.  Raising the data to ``-band`` where it
is lower leaves ``F`` unchanged on every set that avoids ``{d < -band}`` and
can only lower it elsewhere.  If the minimal solution of the raised problem
avoids that set it is therefore the minimal solution of the original one,
and its certified set gap carries over; otherwise the band is doubled.
Clipping from above is not offered: it shifts the energy of every set that
misses part of the deep interior, which can make the empty set optimal.
"""

from __future__ import annotations

import itertools
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .analysis import hausdorff_distance, symdiff_volume
from .density import DensityPair, bayes_classifier
from .distance import signed_distance_to_complement
from .functional import atw_energy
from .grid import Region, ScalarField, ball_stencil
from .solver import NonConvergenceWarning, SolveConfig, SolverReport, solve


class SolverFailure(RuntimeError):
    """A step could not be certified within the solver budget."""

    def __init__(self, message: str, report: SolverReport | None = None, region: Region | None = None):
        super().__init__(message)
        self.report = report
        self.region = region


@dataclass(frozen=True)
class SchemeConfig:
    """Flow settings.

    Parameters
    ----------
    eps : adversarial budget, equal to the time step
    total_time : final time ``T``
    solve : solver settings; the step certifies the set at level 0
    snapshot_every : keep every this many steps in the trace (the last is always kept)
    band : depth below which the data are raised to ``-band``; ``inf`` disables this
    require_certificate : raise :class:`SolverFailure` on steps whose field and
        set are both uncertified; otherwise keep them and mark the step
    """

    eps: float
    total_time: float
    solve: SolveConfig
    snapshot_every: int = 1
    band: float = math.inf
    require_certificate: bool = True

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.total_time < 0:
            raise ValueError("total_time must be nonnegative")
        if not self.band > 0:
            raise ValueError("band must be positive")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be at least 1")
        if not math.isclose(self.solve.eps, self.eps):
            raise ValueError("solver eps differs from the scheme eps")

    @property
    def n_steps(self) -> int:
        """Steps needed to reach ``T`` on the piecewise-constant curve, ``floor(T / eps)``."""
        return int(math.floor(self.total_time / self.eps + 1e-9))


@dataclass(frozen=True)
class StepReport:
    """Outcome of one step.

    ``uncertain`` holds the cells whose sign is not certified by the cellwise
    solver bound.  ``degenerate`` is ``"empty"`` or ``"full"`` for the
    short-circuited inputs, otherwise ``None``.
    """

    solver: SolverReport | None
    uncertain: Region
    degenerate: str | None = None
    band: float = math.inf
    solves: int = 0
    seconds: float = 0.0
    field: ScalarField | None = field(default=None, repr=False, compare=False)

    @property
    def set_gap(self) -> float:
        return 0.0 if self.solver is None else self.solver.set_gap

    @property
    def certified(self) -> bool:
        s = self.solver
        return s is None or s.converged or s.set_certified


def one_step(a: Region, d: DensityPair, cfg: SchemeConfig, flipped: bool = False,
             warm: np.ndarray | None = None, keep_dual: bool = False) -> tuple[Region, StepReport]:
    """Apply the one-step operator to ``a``.

    With ``flipped`` the classical orientation is used instead: data
    ``sdist(., a)`` (positive outside ``a``) and the sublevel set ``{w < 0}``.
    That variant exists to show that the orientation matters.

    Raises :class:`SolverFailure` when neither the field nor the set is certified.
    """
    t0 = time.perf_counter()
    g = a.grid
    if a.is_empty() or a.is_full():
        kind = "empty" if a.is_empty() else "full"
        return a, StepReport(None, g.empty(), kind)
    sd = signed_distance_to_complement(a).values
    data = -sd if flipped else sd
    om = g.omega
    depth = float(np.max(-data[om]))
    # the band check concerns the superlevel set, so the flipped variant never clips
    band = math.inf if flipped else cfg.band
    scfg = cfg.solve if cfg.solve.level is not None else replace(cfg.solve, level=0.0)
    stencil = ball_stencil(g, cfg.eps)
    solves = 0
    while True:
        clipped = band < depth
        vals = np.maximum(data, -band) if clipped else data
        dfield = ScalarField(g, np.where(om, vals, np.nan))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergenceWarning)
            w, rep = solve(dfield, d, scfg, stencil=stencil, warm=warm, keep_dual=True)
        solves += 1
        # the computed set must avoid the raised cells
        if not clipped or not np.any((w.values > 0) & om & (data < -band)):
            break
        warm = rep.dual
        band *= 2
    if not clipped:
        band = math.inf
    inside = (w.values < 0) if flipped else (w.values > 0)
    region = Region(g, inside & om)
    certified = rep.converged or (scfg.stop_on_set and rep.set_certified)
    if not certified and cfg.require_certificate:
        raise SolverFailure(
            f"step not certified: field gap {rep.certified_gap:.3e} (target {rep.tol_gap:.3e}), "
            f"set gap {rep.set_gap:.3e} (target {rep.tol_set:.3e}) after {rep.iters} passes",
            replace(rep, dual=None), region)
    slack = rep.linf_slack
    uncertain = Region(g, om & (np.abs(np.where(om, w.values, 0.0)) <= slack))
    if not keep_dual:
        rep = replace(rep, dual=None)
    return region, StepReport(rep, uncertain, None, band, solves, time.perf_counter() - t0, w)


@dataclass(frozen=True)
class StepRecord:
    k: int
    time: float
    region: Region
    report: StepReport | None
    metrics: dict


@dataclass
class FlowTrace:
    """Snapshots of a flow.  ``extinct_at`` / ``failed_at`` hold step indices.

    After a failure, ``failed_region`` and ``failed_report`` keep the
    uncertified result of the failing step for diagnostics; it is not part of
    the trace.
    """

    eps: float
    steps: list[StepRecord] = field(default_factory=list)
    extinct_at: int | None = None
    failed_at: int | None = None
    failure: str | None = None
    failed_region: Region | None = field(default=None, repr=False)
    failed_report: SolverReport | None = field(default=None, repr=False)

    @property
    def times(self) -> list[float]:
        return [s.time for s in self.steps]

    @property
    def last(self) -> StepRecord:
        return self.steps[-1]

    def region_at(self, t: float) -> Region:
        """The piecewise-constant curve: the region of step ``floor(t / eps)``.

        Degenerate regions are fixed points, so an extinct flow stays at its
        last region.  Raises ``ValueError`` for steps that were not kept or
        lie at or beyond a failed step.
        """
        k = int(math.floor(t / self.eps + 1e-9))
        if k < 0:
            raise ValueError("t must be nonnegative")
        if self.failed_at is not None and k >= self.failed_at:
            raise ValueError(f"step {k} lies beyond the failure at step {self.failed_at}")
        last = self.steps[-1]
        if k >= last.k and (self.extinct_at is not None or self.failed_at is None):
            if k == last.k or self.extinct_at is not None:
                return last.region
            raise ValueError(f"step {k} lies beyond the final step {last.k}")
        for s in self.steps:
            if s.k == k:
                return s.region
        raise ValueError(f"step {k} was not kept (snapshot_every)")


def _metrics(region: Region, t: float, rep: StepReport | None,
             oracle: Callable[[float], Region | None] | None) -> dict:
    m = {"area": region.volume, "radius": math.nan}
    if not region.is_empty():
        m["radius"] = extract_radius(region)[0]
    if rep is not None and rep.solver is not None:
        s = rep.solver
        m.update(energy=s.energy, gap=s.certified_gap, set_gap=s.set_gap, iters=s.iters,
                 subgradient_norm=s.subgradient_norm, uncertain=rep.uncertain.count,
                 seconds=rep.seconds)
    if oracle is not None:
        ref = oracle(t)
        m["symdiff_vs_oracle"] = symdiff_volume(region, ref) if ref is not None else math.nan
        if ref is not None and not ref.is_empty() and not region.is_empty():
            m["hausdorff_vs_oracle"] = hausdorff_distance(region, ref)
        else:
            m["hausdorff_vs_oracle"] = math.nan
    return m


def run_flow(a0: Region | None, d: DensityPair, cfg: SchemeConfig,
             oracle: Callable[[float], Region | None] | None = None,
             on_step: Callable[[StepRecord], None] | None = None) -> FlowTrace:
    """Iterate the one-step operator ``floor(T / eps)`` times.

    ``a0=None`` starts from the Bayes classifier of ``d``.  The trace keeps
    every ``snapshot_every``-th step and the last one.  The flow stops early
    when the region becomes empty or full (``extinct_at``), and returns the
    partial trace with ``failed_at``/``failure`` set when a step cannot be
    certified.  ``oracle(t)`` may supply a reference region for the metrics;
    ``on_step`` is called with every computed step, kept or not.
    """
    a = bayes_classifier(d) if a0 is None else a0
    trace = FlowTrace(cfg.eps)
    first = StepRecord(0, 0.0, a, None, _metrics(a, 0.0, None, oracle))
    trace.steps.append(first)
    if on_step is not None:
        on_step(first)
    n = cfg.n_steps
    warm = None
    for k in range(1, n + 1):
        t = k * cfg.eps
        try:
            a, rep = one_step(a, d, cfg, warm=warm, keep_dual=True)
        except SolverFailure as err:
            trace.failed_at = k
            trace.failure = str(err)
            trace.failed_region = err.region
            trace.failed_report = err.report
            break
        warm = rep.solver.dual if rep.solver is not None else None
        slim = replace(rep, solver=replace(rep.solver, dual=None)) if rep.solver is not None else rep
        rec = StepRecord(k, t, a, slim, _metrics(a, t, slim, oracle))
        if on_step is not None:
            on_step(rec)
        degenerate = a.is_empty() or a.is_full()
        if k % cfg.snapshot_every == 0 or k == n or degenerate:
            trace.steps.append(rec)
        if degenerate:
            trace.extinct_at = k
            break
    return trace


def extinction_time(trace: FlowTrace) -> float | None:
    """Time of the first degenerate step, if the flow reached one."""
    return None if trace.extinct_at is None else trace.extinct_at * trace.eps


# ---------------------------------------------------------------------------
# selection oracle


MAX_ORACLE_CELLS = 16


def enumerate_energies(a: Region, d: DensityPair, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Energies of all subsets of the domain, computed directly from the windows.

    Returns the subset masks (one row per subset, columns are the domain
    cells in linear order) and their distance-weighted energies.
    """
    g = a.grid
    cells = np.flatnonzero(g.omega.ravel())
    n = cells.size
    if n > MAX_ORACLE_CELLS:
        raise ValueError(f"the exhaustive oracle handles at most {MAX_ORACLE_CELLS} cells, got {n}")
    pos = {int(c): i for i, c in enumerate(cells)}
    coords = np.array(np.unravel_index(cells, g.shape)).T
    stencil = ball_stencil(g, eps)
    windows = []
    for c in coords:
        members = []
        for o in stencil.offsets:
            y = c + o
            if np.all(y >= 0) and np.all(y < np.array(g.shape)):
                lin = int(np.ravel_multi_index(tuple(y), g.shape))
                if lin in pos:
                    members.append(pos[lin])
        windows.append(members)
    subsets = np.array(list(itertools.product([False, True], repeat=n)), dtype=bool)[:, ::-1]
    r0 = d.rho0.ravel()[cells]
    r1 = d.rho1.ravel()[cells]
    rho = d.rho.ravel()[cells]
    per = np.zeros(len(subsets))
    for i, members in enumerate(windows):
        up = subsets[:, members].any(axis=1)
        down = subsets[:, members].all(axis=1)
        x = subsets[:, i]
        per += r0[i] * (up & ~x) + r1[i] * (x & ~down)
    dist = _boundary_distance(a)[cells]
    flip = subsets != a.mask.ravel()[cells]
    fid = flip.astype(float) @ (dist * rho)
    return subsets, g.cell_volume / eps * (per + fid)


def _boundary_distance(a: Region) -> np.ndarray:
    from .distance import dist_to_boundary

    return dist_to_boundary(a).values.ravel()


def selection_oracle(a: Region, d: DensityPair, cfg: SchemeConfig) -> tuple[Region, float]:
    """Exhaustive minimizer of the distance-weighted energy over all subsets.

    Ties go to the smallest subset (fewest cells, then lowest index pattern).
    """
    subsets, energies = enumerate_energies(a, d, cfg.eps)
    best = float(energies.min())
    tied = np.flatnonzero(energies <= best)
    pick = tied[np.argmin(subsets[tied].sum(axis=1))]
    g = a.grid
    mask = np.zeros(g.omega.size, dtype=bool)
    mask[np.flatnonzero(g.omega.ravel())] = subsets[pick]
    return Region(g, mask.reshape(g.shape)), best


def tol_select(report: StepReport) -> float:
    """Energy slack of a computed step relative to the exact minimum.

    The set gap of the step bounds this directly.
    """
    return report.set_gap


def step_energy(region: Region, a: Region, d: DensityPair, eps: float) -> float:
    return atw_energy(region, a, d, eps)


# ---------------------------------------------------------------------------
# radius extraction


def extract_radius(r: Region) -> tuple[float, np.ndarray]:
    """Radius of the ball with the same area (2D) or length (1D), and the centroid."""
    if r.is_empty():
        raise ValueError("cannot extract a radius from an empty region")
    g = r.grid
    vol = r.volume
    if g.dim == 2:
        rad = math.sqrt(vol / math.pi)
    else:
        rad = vol / 2
    centroid = g.coords()[r.mask].mean(axis=0)
    return rad, centroid
