"""Numerical laboratory for maximal L_p regularity of non-autonomous form evolutions."""

from maxreg.engine import (
    QuadratureSpec,
    Solution,
    apply_L,
    apply_Q,
    apply_R,
    build_plan,
    q_norm_estimate,
    solve_representation,
)
from maxreg.forms import FormFamily, certify_bounds, estimate_modulus, shift
from maxreg.grid import GridFunction, uniform_grid
from maxreg.hilbert import GramPair, build_spectral_scale, interp_norm

__all__ = [
    "FormFamily",
    "GramPair",
    "GridFunction",
    "QuadratureSpec",
    "Solution",
    "apply_L",
    "apply_Q",
    "apply_R",
    "build_plan",
    "build_spectral_scale",
    "certify_bounds",
    "estimate_modulus",
    "interp_norm",
    "q_norm_estimate",
    "shift",
    "solve_representation",
    "uniform_grid",
]
