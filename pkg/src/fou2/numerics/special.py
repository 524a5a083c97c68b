"""Gamma-family special functions."""

import math

from scipy import special as _sc

from ..exceptions import DomainError


def log_gamma(x):
    """Natural log of the gamma function for ``x > 0``."""
    if not x > 0:
        raise DomainError(f"log_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def beta(x, y):
    """Complete Beta function B(x, y)."""
    if not (x > 0 and y > 0):
        raise DomainError(f"beta requires positive arguments, got ({x!r}, {y!r})")
    # lgamma(x) + lgamma(y) is summed in a fixed order so beta(x, y) == beta(y, x)
    lo, hi = (x, y) if x <= y else (y, x)
    return math.exp(math.lgamma(lo) + math.lgamma(hi) - math.lgamma(x + y))


def incomplete_beta(p, q, x):
    """Non-regularized incomplete Beta integral ``∫_0^x z^(p-1) (1-z)^(q-1) dz``.

    Parameters
    ----------
    p, q : float
        Positive shape parameters.
    x : float
        Upper limit in ``[0, 1]``.
    """
    if not (p > 0 and q > 0):
        raise DomainError(f"incomplete_beta requires p, q > 0, got ({p!r}, {q!r})")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"incomplete_beta requires 0 <= x <= 1, got {x!r}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return beta(p, q)
    return float(_sc.betainc(p, q, x)) * beta(p, q)
