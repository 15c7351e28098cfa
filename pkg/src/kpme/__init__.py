"""Reciprocal-space Ewald sums via sums of Kronecker products.

The long-range part of an Ewald sum is the truncated Fourier series
``H_M q`` with mode weights ``alpha(|m|)``.  This package factors the
weight tensor as a sum of Kronecker products, interpolates particles onto
per-cell grids, and applies the resulting operator with per-axis reductions
over a (simulated) grid of ranks.
"""

from .alphaskp import (
    EwaldConfig,
    NumericalFailure,
    RuleRangeError,
    SkpDecomposition,
    assemble_alpha,
    bundled_rule_path,
    load_tabulated_rule,
    nkpa_svd,
    sinc_rule,
    sinc_rule_for_eps,
    skp_from_quadrature,
)
from .geometry import Box3, build_cell_grid, check_convergence_ratio, uniform_point_cloud
from .kernels import BACKEND
from .oracle import dense_reciprocal_apply
from .parallel import CommunicatorError, RankGrid, SimWorld, build_plan, run_kpme, spkmv

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Box3",
    "CommunicatorError",
    "EwaldConfig",
    "NumericalFailure",
    "RankGrid",
    "RuleRangeError",
    "SimWorld",
    "SkpDecomposition",
    "assemble_alpha",
    "build_cell_grid",
    "build_plan",
    "bundled_rule_path",
    "check_convergence_ratio",
    "dense_reciprocal_apply",
    "load_tabulated_rule",
    "nkpa_svd",
    "run_kpme",
    "sinc_rule",
    "sinc_rule_for_eps",
    "skp_from_quadrature",
    "spkmv",
    "uniform_point_cloud",
]
