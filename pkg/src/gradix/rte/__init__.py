"""Transport physics: cases, residual operators and reference solutions."""

from .case import (
    CaseSpec,
    ResidualBundle,
    boundary_residual,
    data_residual,
    derive_source_from_exact,
    interior_residual,
    interior_residual_var,
    interior_residuals,
    family_residuals,
    isotropic,
    residual_bundle,
    scattering_integral,
    sigma_g,
    temporal_residual,
)
from .catalog import (
    CASES,
    case_1d_gaussian,
    case_2d_gaussian,
    case_2d_gaussian_inverse,
    case_diag_gaussian,
    case_slab_discontinuous,
    case_square_diagonal,
    get_case,
    make_inverse,
)
from .manufactured import angular_terms, linear_anisotropic, manufactured_graded_case, smooth_intensity
from .oracle import oracle_integrate_characteristic
from ..special import erf

__all__ = [
    "CASES",
    "CaseSpec",
    "ResidualBundle",
    "angular_terms",
    "boundary_residual",
    "case_1d_gaussian",
    "case_2d_gaussian",
    "case_2d_gaussian_inverse",
    "case_diag_gaussian",
    "case_slab_discontinuous",
    "case_square_diagonal",
    "data_residual",
    "derive_source_from_exact",
    "erf",
    "get_case",
    "interior_residual",
    "interior_residual_var",
    "interior_residuals",
    "family_residuals",
    "isotropic",
    "linear_anisotropic",
    "make_inverse",
    "manufactured_graded_case",
    "oracle_integrate_characteristic",
    "residual_bundle",
    "scattering_integral",
    "sigma_g",
    "smooth_intensity",
    "temporal_residual",
]
