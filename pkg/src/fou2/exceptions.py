"""Exception hierarchy shared across the package."""

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, estimate, error_bound):
        super().__init__(f"{message} (estimate={estimate!r}, error bound={error_bound!r})")
        self.estimate = estimate
        self.error_bound = error_bound


class BracketError(ValueError):
    """The root-finding bracket shows no sign change."""


class FactorizationError(np.linalg.LinAlgError):
    """A covariance matrix is indefinite beyond the tolerated ridge."""

    def __init__(self, message, min_eigenvalue=None, pivot=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue
        self.pivot = pivot


class EmbeddingError(RuntimeError):
    """Circulant embedding produced a materially negative eigenvalue."""

    def __init__(self, message, min_eigenvalue):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class GridCapError(ValueError):
    """A simulation grid exceeds the configured size cap of the exact sampler."""


class EstimatorRangeError(ValueError):
    """The observed statistic cannot be inverted inside the requested bracket."""

    def __init__(self, message, achievable):
        super().__init__(message)
        self.achievable = achievable


class DegeneratePathError(ValueError):
    """A path has zero quadratic variation content (zero denominator)."""


class ConfigError(DomainError):
    """An experiment configuration violates its schema; ``keys`` names the offenders."""

    def __init__(self, message, keys):
        super().__init__(f"{message}: {', '.join(keys)}")
        self.keys = tuple(keys)


class ExperimentError(RuntimeError):
    """More replicates failed than the harness tolerates; ``report`` holds what was computed."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
