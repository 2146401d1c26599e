"""Robust grid filters for a partially observed diffusion."""

from ._rfl import (
    BlockCoefficients,
    Config,
    ConfigError,
    GridMeasure,
    block_coefficients,
    covariance_table,
    covariance_table_quadrature,
    distances,
    gaussian_on_grid,
    gram_factor,
    gram_matrix,
    grid_filter,
    log_psi_direct,
    log_psi_hat,
    particle_filter,
    run_stability,
    run_truncation_sweep,
    shape_coefficients,
    simulate,
    uniform_grid,
    validate_hypotheses,
    verify,
    verify_suites,
)

__all__ = [name for name in dir() if not name.startswith("_")]
