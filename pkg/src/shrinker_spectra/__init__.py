"""Self-shrinking tori as closed geodesics, their stability spectra and index bounds."""

from .bounds import (
    IndexReport,
    ModeBounds,
    coarse_index_bounds,
    consistency_report,
    entropy_lower_bounds,
    fine_index_bounds,
    fine_mode_bounds,
    index_from_counts,
    k_max_for,
)
from .geometry import (
    CrossSection,
    build_cross_section,
    geometric_scalars,
    normal_projections,
    read_curve_csv,
    resample_sigma_arclength,
    shrinker_residual,
    sigma,
    write_curve_csv,
)
from .solver import ShootingResult, certify, shoot_closed_torus
from .spectral import ModeSpectrum, compute_spectra, index_aggregate, mode_spectrum

__version__ = "0.1.0"
