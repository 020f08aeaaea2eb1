"""Python bindings for the oispec toolkit."""

from ._core import (
    ComputationError,
    Error,
    ValidationError,
    brute_force_sparse,
    builtin_dictionary,
    light_vector,
    load_cube,
    omp,
    rayleigh_limit_um,
    run_pipeline,
    simulate_preset,
    spectrum_to_xyz,
    total_images,
    wavelength_count,
    xyz_to_srgb,
)

__all__ = [
    "ComputationError",
    "Error",
    "ValidationError",
    "brute_force_sparse",
    "builtin_dictionary",
    "light_vector",
    "load_cube",
    "omp",
    "rayleigh_limit_um",
    "run_pipeline",
    "simulate_preset",
    "spectrum_to_xyz",
    "total_images",
    "wavelength_count",
    "xyz_to_srgb",
]
