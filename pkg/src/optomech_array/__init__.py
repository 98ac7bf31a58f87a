"""Polariton bands and slow-light dynamics in a coupled optomechanical crystal array."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    ArrayParams,
    BareParams,
    Branch,
    band_gap,
    band_table,
    bandwidths,
    bogoliubov_coefficients,
    derive_effective_params,
    group_velocity,
    photon_dispersion,
    polariton_frequencies,
    refractive_index_shift,
)
