"""Shared numerical primitives."""

from .linalg import circulant_sqrt_spectrum, psd_factor
from .quadrature import (DEFAULT_SPEC, QuadratureSpec, integrate, integrate_power_weight,
                         integrate_with_error)
from .rng import RngStream
from .roots import find_root_bracketed
from .special import beta, incomplete_beta, log_gamma

__all__ = [
    "QuadratureSpec", "DEFAULT_SPEC", "integrate", "integrate_with_error", "integrate_power_weight",
    "find_root_bracketed", "psd_factor", "circulant_sqrt_spectrum", "RngStream",
    "log_gamma", "beta", "incomplete_beta",
]
