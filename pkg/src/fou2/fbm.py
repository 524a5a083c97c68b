"""Fractional Brownian motion: covariance, Volterra kernel, exact sampling."""

from dataclasses import dataclass
import math
import os

import numpy as np

from .exceptions import DomainError, FactorizationError, GridCapError
from .numerics import QuadratureSpec, integrate, integrate_power_weight, psd_factor

DEFAULT_GRID_CAP = 8192
GRID_CAP_ENV = "FOU2_GRID_CAP"


def grid_cap():
    """Largest grid the exact sampler accepts (env ``FOU2_GRID_CAP`` overrides)."""
    raw = os.environ.get(GRID_CAP_ENV)
    if raw is None:
        return DEFAULT_GRID_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise DomainError(f"{GRID_CAP_ENV} must be an integer, got {raw!r}") from None
    if cap < 2:
        raise DomainError(f"{GRID_CAP_ENV} must be at least 2, got {cap}")
    return cap


def check_hurst(H, lower=0.0, upper=1.0):
    """Validate a Hurst index lying strictly inside ``(lower, upper)``."""
    if not (isinstance(H, (int, float, np.floating)) and lower < H < upper):
        raise DomainError(f"Hurst parameter must lie in ({lower}, {upper}), got {H!r}")
    return float(H)


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing, finite, non-negative observation times."""

    times: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise DomainError("a time grid needs a non-empty 1-D array of times")
        if not np.all(np.isfinite(t)):
            raise DomainError("grid times must be finite")
        if t[0] < 0:
            raise DomainError(f"grid must start at a non-negative time, got {t[0]!r}")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise DomainError("grid times must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, horizon, n):
        """``n`` equal steps on ``[0, horizon]`` (``n + 1`` points)."""
        if not (horizon > 0 and int(n) >= 1):
            raise DomainError(f"uniform grid needs horizon > 0 and n >= 1, got ({horizon!r}, {n!r})")
        return cls(np.linspace(0.0, float(horizon), int(n) + 1))

    @classmethod
    def from_step(cls, horizon, step):
        n = int(round(horizon / step))
        if n < 1 or not math.isclose(n * step, horizon, rel_tol=1e-9, abs_tol=1e-12):
            raise DomainError(f"horizon {horizon!r} is not a whole number of steps {step!r}")
        return cls.uniform(horizon, n)

    def __len__(self):
        return self.times.size

    @property
    def horizon(self):
        return float(self.times[-1])

    def is_uniform(self, rtol=1e-9):
        if self.times.size < 3:
            return True
        d = np.diff(self.times)
        return bool(np.all(np.abs(d - d[0]) <= rtol * d[0]))

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.times, other.times)

    def __hash__(self):
        return hash(self.times.tobytes())


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Values observed on a :class:`TimeGrid`."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (len(self.grid),):
            raise DomainError(f"path has {v.shape} values for a grid of {len(self.grid)} points")
        if not np.all(np.isfinite(v)):
            raise DomainError("path values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def times(self):
        return self.grid.times

    def __len__(self):
        return self.values.size


def _check_time(t, name):
    if not t >= 0:
        raise DomainError(f"{name} must be non-negative, got {t!r}")


def fbm_cov(t, s, H):
    """Covariance ½(t^{2H} + s^{2H} − |t−s|^{2H}) of fBm at times ``t`` and ``s``."""
    H = check_hurst(H)
    _check_time(t, "t")
    _check_time(s, "s")
    return 0.5 * (t ** (2 * H) + s ** (2 * H) - abs(t - s) ** (2 * H))


def fbm_cov_matrix(times, H):
    t = np.asarray(times, dtype=float)
    h2 = 2 * check_hurst(H)
    return 0.5 * (t[:, None] ** h2 + t[None, :] ** h2 - np.abs(t[:, None] - t[None, :]) ** h2)


def increment_covariance(times, H):
    """Covariance of the increments ``B(t[i+1]) − B(t[i])``."""
    t = np.asarray(times, dtype=float)
    h2 = 2 * check_hurst(H)
    lo, hi = t[:-1], t[1:]

    def p(x):
        return np.abs(x) ** h2

    return 0.5 * (p(hi[:, None] - lo[None, :]) + p(lo[:, None] - hi[None, :])
                  - p(hi[:, None] - hi[None, :]) - p(lo[:, None] - lo[None, :]))


def hurst_constant(H):
    """Normalizing constant c_H of the Volterra kernel (H > ½)."""
    H = check_hurst(H, 0.5)
    return (H - 0.5) * math.sqrt(2 * H * math.gamma(1.5 - H)
                                 / (math.gamma(H + 0.5) * math.gamma(2 - 2 * H)))


def volterra_kernel(t, s, H, spec=None):
    """K_H(t, s) = c_H s^{½−H} ∫_s^t (u−s)^{H−3/2} u^{H−½} du for ``0 < s < t``.

    Only used to check the representation R_H(t, s) = ∫ K_H(t,u) K_H(s,u) du;
    no estimator consumes it.
    """
    H = check_hurst(H, 0.5)
    if not 0 < s < t:
        raise DomainError(f"volterra_kernel requires 0 < s < t, got s={s!r}, t={t!r}")
    spec = spec or QuadratureSpec(abs_tol=1e-13, rel_tol=1e-11)
    # distance d = u − s carries the singular factor exactly
    inner = integrate_power_weight(lambda d: (s + d) ** (H - 0.5), t - s, H - 1.5, spec)
    return hurst_constant(H) * s ** (0.5 - H) * inner


def weighted_inner_product(phi, psi, T, H, breakpoints=(), spec=None):
    """α_H ∫_0^T ∫_0^T φ(s) ψ(t) |t−s|^{2H−2} ds dt with α_H = H(2H−1).

    ``breakpoints`` lists jump locations of φ and ψ; they split both
    integrations.  The diagonal singularity of exponent 2H−2 is removed by the
    power substitution on either side of ``s = t``.
    """
    H = check_hurst(H, 0.5)
    if not T > 0:
        raise DomainError(f"interval length must be positive, got {T!r}")
    spec = spec or QuadratureSpec(abs_tol=1e-12, rel_tol=1e-10, max_subdivisions=400)
    cuts = sorted({float(b) for b in breakpoints if 0 < b < T})
    beta = 2 * H - 2

    def inner(t):
        # s = t − d on the left of the diagonal, s = t + d on the right
        left = integrate_power_weight(lambda d: phi(t - d), t, beta, spec,
                                      breaks=[t - c for c in cuts])
        right = integrate_power_weight(lambda d: phi(t + d), T - t, beta, spec,
                                       breaks=[c - t for c in cuts])
        return left + right

    outer_spec = QuadratureSpec(spec.abs_tol * 10, spec.rel_tol * 10, spec.max_subdivisions)
    outer_spec = outer_spec.with_singularities(cuts)
    return H * (2 * H - 1) * integrate(lambda t: psi(t) * inner(t), 0.0, T, outer_spec)


def _draw(rng, n, block):
    z = np.asarray(rng.normals(n, block=block), dtype=float)
    if z.shape != (n,):
        raise DomainError(f"random source returned shape {z.shape}, expected ({n},)")
    return z


def sample_fbm_exact(grid, H, rng, block=0):
    """Exact draw of fBm on an arbitrary grid.

    The increment covariance (including the increment from time 0 when the grid
    starts later) is factorized and the increments are cumulatively summed, so
    ``B(0) = 0`` holds exactly when ``grid`` starts at 0.
    """
    H = check_hurst(H)
    if not isinstance(grid, TimeGrid):
        grid = TimeGrid(grid)
    if len(grid) > grid_cap():
        raise GridCapError(f"grid of {len(grid)} points exceeds the exact-sampler cap {grid_cap()}")
    t = grid.times
    starts_at_zero = t[0] == 0.0
    nodes = t if starts_at_zero else np.concatenate([[0.0], t])
    if nodes.size == 1:
        return SamplePath(grid, np.zeros(1))
    try:
        L = psd_factor(increment_covariance(nodes, H))
    except FactorizationError as exc:
        raise FactorizationError(
            f"fBm increment covariance on {nodes.size} points in [{nodes[0]:.6g}, {nodes[-1]:.6g}] "
            f"(H={H}) is not PSD: {exc}", exc.min_eigenvalue, exc.pivot) from exc
    incr = L @ _draw(rng, nodes.size - 1, block)
    levels = np.concatenate([[0.0], np.cumsum(incr)])
    if not starts_at_zero:
        levels = levels[1:]
    return SamplePath(grid, levels)
