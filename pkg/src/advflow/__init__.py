"""Minimizing-movement flows driven by adversarial-training energies on grids.

The one-step energy of a region ``A`` is a nonlocal total variation plus a
density-weighted quadratic fidelity to the signed distance of ``A``; its
minimizer, thresholded at zero, gives the next region.
"""

__version__ = "0.1.0"

from .density import DensityPair, analytic_density, bayes_classifier, from_arrays
from .distance import dist_to_boundary, edt, signed_distance_to_complement
from .functional import atw_energy, coarea_check, per_eps, submodularity_gap, tv_eps
from .grid import Grid, Region, ScalarField, Stencil, ball_stencil, build_grid, dilate, erode
from .scheme import (FlowTrace, SchemeConfig, SolverFailure, StepReport, extract_radius, one_step,
                     run_flow, selection_oracle)
from .solver import NonConvergenceWarning, SolveConfig, SolverReport, energy, solve, subgradient_select

__all__ = [
    "DensityPair", "analytic_density", "bayes_classifier", "from_arrays",
    "dist_to_boundary", "edt", "signed_distance_to_complement",
    "atw_energy", "coarea_check", "per_eps", "submodularity_gap", "tv_eps",
    "Grid", "Region", "ScalarField", "Stencil", "ball_stencil", "build_grid", "dilate", "erode",
    "FlowTrace", "SchemeConfig", "SolverFailure", "StepReport", "extract_radius", "one_step",
    "run_flow", "selection_oracle",
    "NonConvergenceWarning", "SolveConfig", "SolverReport", "energy", "solve", "subgradient_select",
]
