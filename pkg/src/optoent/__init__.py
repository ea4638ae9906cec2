"""Conditional Gaussian states of two optomechanical mirrors under continuous homodyne measurement.

Pipeline: laboratory parameters -> per-mode dimensionless quantities
(:mod:`optoent.model`) -> conditional covariance from the Riccati equation
(:mod:`optoent.riccati`) -> two-mirror entanglement, squeezing and purity
(:mod:`optoent.gaussian`), with grid sweeps (:mod:`optoent.sweep`) and a
trajectory-level cross-check (:mod:`optoent.montecarlo`).
"""
__version__ = "0.1.0"

from .model import (Channel, ModeLabel, ModeSpec, PhysicalParams, both_modes,  # noqa: E402
                    filter_coefficients, hz, mode_quantities, table_one)
from .riccati import (Cov2, conditional_steady_state, integrate_riccati,  # noqa: E402
                      lyapunov_steady_state, steady_state_analytic, system_matrices)
from .gaussian import (combine_modes, entanglement_from_matrix,  # noqa: E402
                       epsilon_cr_closed_form, purity, squeeze_eigenvalues, squeezing_angle,
                       wigner_ellipse)

__all__ = [
    "Channel", "ModeLabel", "ModeSpec", "PhysicalParams", "both_modes", "filter_coefficients",
    "hz", "mode_quantities", "table_one", "Cov2", "conditional_steady_state",
    "integrate_riccati", "lyapunov_steady_state", "steady_state_analytic", "system_matrices",
    "combine_modes", "entanglement_from_matrix", "epsilon_cr_closed_form", "purity",
    "squeeze_eigenvalues", "squeezing_angle", "wigner_ellipse",
]
