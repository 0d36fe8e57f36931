"""Carleman weights, weighted quadrature and the inequality checks built on them."""

from .accumulate import Scaled, compensated_sum, integrate, weighted_integral
from .checks import (
    CarlemanTerms,
    EnergyCheck,
    IdentityResult,
    SlackCheck,
    carleman_check,
    carleman_slack,
    carleman_terms,
    energy_bound_constant,
    energy_inequality,
    energy_residual,
    ibp_identity_residual,
    pointwise_bound_margin,
    s_star,
)
from .quadrature import QuadratureError, QuadratureGrid, slice_grid, surface_grid, volume_grid
from .weights import CarlemanWeight, weight_eval

__all__ = [
    "CarlemanTerms", "CarlemanWeight", "EnergyCheck", "IdentityResult", "QuadratureError", "QuadratureGrid",
    "Scaled", "SlackCheck", "carleman_check", "carleman_slack", "carleman_terms", "compensated_sum",
    "energy_bound_constant", "energy_inequality", "energy_residual", "ibp_identity_residual", "integrate",
    "pointwise_bound_margin", "s_star", "slice_grid", "surface_grid", "volume_grid", "weight_eval", "weighted_integral",
]
