"""The fractional Ornstein-Uhlenbeck process of the second kind.

X solves dX = −θ X dt + dY with Y_t = ∫_0^t e^{−s} dB_{a_s}, a_t = H e^{t/H}, and
X_0 = 0.  Paths are built from the Lamperti process Z_t = e^{−t} B_{a_t}, which
is stationary with covariance :func:`z_cov`.  Sampling Z on the uniform t-grid
is the same as sampling B on the (exponentially spread) transformed grid
{a_{t_i}}, because B_{a_t} = e^t Z_t; working with Z keeps every covariance
entry of order one, whereas the raw entries of B span hundreds of decades.
"""

from collections import OrderedDict
from dataclasses import dataclass
from functools import lru_cache
import logging
import math
import threading

import numpy as np
from scipy import linalg as _la
from scipy import signal as _signal

from .exceptions import DomainError, EmbeddingError, FactorizationError, GridCapError
from .fbm import SamplePath, TimeGrid, check_hurst, grid_cap
from .numerics import (QuadratureSpec, beta, circulant_sqrt_spectrum, incomplete_beta,
                       integrate, integrate_power_weight, psd_factor)

log = logging.getLogger(__name__)

SCHEMES = ("left", "trapezoid")
SAMPLERS = ("exact", "stationary")
BURN_IN_TOL = 1e-8


@dataclass(frozen=True)
class ModelParams:
    """Drift ``theta > 1`` and Hurst index ``hurst`` in (½, 1)."""

    theta: float
    hurst: float

    def __post_init__(self):
        if not (isinstance(self.theta, (int, float, np.floating)) and self.theta > 1):
            raise DomainError(f"theta must exceed 1, got {self.theta!r}")
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "hurst", check_hurst(self.hurst, 0.5))

    @property
    def gamma(self):
        """Exponent (θ−1)H that recurs in every closed form."""
        return (self.theta - 1.0) * self.hurst


@dataclass(frozen=True)
class SimConfig:
    """Uniform simulation grid on ``[0, horizon]`` with step ``step``.

    ``scheme`` selects the Riemann-Stieltjes weights on each step (left point or
    trapezoid); ``sampler`` selects the Gaussian factorization route.
    """

    horizon: float
    step: float = 0.025
    scheme: str = "trapezoid"
    sampler: str = "exact"

    def __post_init__(self):
        if not self.horizon > 0:
            raise DomainError(f"horizon must be positive, got {self.horizon!r}")
        if not 0 < self.step < 1:
            raise DomainError(f"step must lie in (0, 1), got {self.step!r}")
        if self.scheme not in SCHEMES:
            raise DomainError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.sampler not in SAMPLERS:
            raise DomainError(f"sampler must be one of {SAMPLERS}, got {self.sampler!r}")
        n = self.n_steps
        if not math.isclose(n * self.step, self.horizon, rel_tol=1e-9, abs_tol=1e-12):
            raise DomainError(f"horizon {self.horizon!r} is not a whole number of steps {self.step!r}")
        if self.sampler == "exact" and n > grid_cap():
            raise GridCapError(f"grid of {n} steps exceeds the exact-sampler cap {grid_cap()}")

    @property
    def n_steps(self):
        return max(int(round(self.horizon / self.step)), 1)

    @property
    def grid(self):
        return TimeGrid.uniform(self.horizon, self.n_steps)


def time_change(t, H, alpha=1.0):
    """a_t = (H/α) e^{α t / H}; the default α = 1 gives a_t = H e^{t/H}."""
    return (H / alpha) * math.exp(alpha * t / H)


def z_cov(tau, H):
    """Covariance of the Lamperti process Z_t = e^{−t} B_{a_t} at lag ``tau``.

    ½ H^{2H} [e^{−τ} + e^{τ}(1 − (1 − e^{−τ/H})^{2H})], written with expm1/log1p
    so the large-lag tail keeps full relative precision.
    """
    H = check_hurst(H)
    tau = np.abs(np.asarray(tau, dtype=float))
    with np.errstate(divide="ignore"):
        tail = -np.expm1(2 * H * np.log1p(-np.exp(-tau / H)))
    out = 0.5 * H ** (2 * H) * (np.exp(-tau) + np.exp(tau) * tail)
    return float(out) if out.ndim == 0 else out


def _alpha_h(H):
    return H * (2 * H - 1)


def _dy_density_regular(d, H):
    # covariance density of dY at lag d, divided by its singular factor d^{2H−2}:
    # E[dY_u dY_v] = |u−v|^{2H−2} · this · du dv
    ratio = -math.expm1(-d / H) / d if d > 0 else 1.0 / H
    return _alpha_h(H) * H ** (2 * H - 2) * math.exp((1 - 1 / H) * d) * ratio ** (2 * H - 2)


_COV_SPEC = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-10, max_subdivisions=400)


def _diag_singular_double(weight_outer, weight_inner, kernel, lo, s_hi, t_hi, beta_exp, spec):
    """∫_lo^{s_hi} w_o(r) ∫_lo^{t_hi} w_i(w) |r−w|^β kernel(|r−w|) dw dr for smooth ``kernel``.

    The inner integral is split on the diagonal and written in the distance
    d = |r − w| so the weight d^β is absorbed exactly.
    """
    if s_hi <= lo or t_hi <= lo:
        return 0.0

    def inner(r):
        if r < t_hi:
            left = integrate_power_weight(lambda d: weight_inner(r - d) * kernel(d), r - lo,
                                          beta_exp, spec)
            right = integrate_power_weight(lambda d: weight_inner(r + d) * kernel(d), t_hi - r,
                                           beta_exp, spec)
            return left + right
        d0 = r - t_hi
        return integrate(lambda d: weight_inner(r - d) * d ** beta_exp * kernel(d),
                         d0, r - lo, spec.with_singularities([d0]))

    outer = QuadratureSpec(spec.abs_tol * 10, spec.rel_tol * 10, spec.max_subdivisions)
    pts = [t_hi] if lo < t_hi < s_hi else []
    return integrate(lambda r: weight_outer(r) * inner(r), lo, s_hi,
                     outer.with_singularities(pts + [lo, s_hi]))


def noise_cov(s, t, H, alpha=1.0, spec=_COV_SPEC):
    """Cov(Y^{(α)}_s, Y^{(α)}_t) for Y^{(α)}_t = ∫_0^t e^{−αu} dB_{a_u}, a_u = (H/α)e^{αu/H}.

    Evaluated in the fBm time r = a_u, where e^{−αu} = (αr/H)^{−H}:
    α_H (H/α)^{2H} ∫_{a_0}^{a_s} ∫_{a_0}^{a_t} (rw)^{−H} |r−w|^{2H−2} dw dr.
    """
    H = check_hurst(H, 0.5)
    if not (s >= 0 and t >= 0):
        raise DomainError(f"times must be non-negative, got ({s!r}, {t!r})")
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha!r}")
    a0 = time_change(0.0, H, alpha)
    a_s, a_t = time_change(s, H, alpha), time_change(t, H, alpha)
    b = 2 * H - 2

    def weight(r):
        return r ** (-H)

    val = _diag_singular_double(weight, weight, lambda d: 1.0, a0, a_s, a_t, b, spec)
    return _alpha_h(H) * (H / alpha) ** (2 * H) * val


def y1_cov(s, t, H, spec=_COV_SPEC):
    """Covariance of the driving noise Y^{(1)} at times ``s`` and ``t``."""
    return noise_cov(s, t, H, 1.0, spec)


def x_cov(s, t, params, spec=_COV_SPEC):
    """Cov(X_s, X_t) for the zero-start process.

    The fBm-time double integral
    α_H H^{−2(θ−1)H} e^{−θ(s+t)} ∫_{a_0}^{a_s}∫_{a_0}^{a_t} (rw)^{(θ−1)H} |r−w|^{2H−2} dr dw
    is evaluated after mapping r = a_u, w = a_v back to log time, where it reads
    ∫_0^s∫_0^t e^{−θ(s−u)} e^{−θ(t−v)} k(|u−v|) du dv with the stationary density
    k(d) = α_H H^{2H−2} e^{(1−1/H)d} (1 − e^{−d/H})^{2H−2}.  This avoids the
    e^{T/H} dynamic range of the fBm time axis.
    """
    if not (s >= 0 and t >= 0):
        raise DomainError(f"times must be non-negative, got ({s!r}, {t!r})")
    th, H = params.theta, params.hurst
    if s < t:
        s, t = t, s
    return _diag_singular_double(lambda u: math.exp(-th * (s - u)),
                                 lambda v: math.exp(-th * (t - v)),
                                 lambda d: _dy_density_regular(d, H), 0.0, s, t, 2 * H - 2, spec)


def beta_core(params):
    """B((θ−1)H + 1, 2H − 1)."""
    return beta(params.gamma + 1.0, 2 * params.hurst - 1.0)


def stationary_variance(params):
    """Var(U_0) = (2H−1) H^{2H} B((θ−1)H+1, 2H−1) / θ: the ergodic limit of (1/T)∫X²."""
    H = params.hurst
    return (2 * H - 1) * H ** (2 * H) * beta_core(params) / params.theta


def correction_limit(params):
    """Large-T limit of the Skorokhod correction per unit time: θ · stationary variance."""
    H = params.hurst
    return (2 * H - 1) * H ** (2 * H) * beta_core(params)


def tail_beta(lam, a, q, spec):
    """∫_{x0}^1 w^{−a} (1−w)^{q−1} dw with x0 = e^{−lam}, lam > 0."""
    # (1−w)^{q−1} near 1 in the distance to 1; log coordinates further left
    def near_one(d):
        return (1.0 - d) ** (-a)

    if lam <= math.log(2.0):
        return integrate_power_weight(near_one, -math.expm1(-lam), q - 1.0, spec)
    lo = integrate(lambda y: math.exp(y * (1.0 - a)) * (-math.expm1(y)) ** (q - 1.0),
                   -lam, -math.log(2.0), spec)
    return lo + integrate_power_weight(near_one, 0.5, q - 1.0, spec)


def stationary_cov(t, params, spec=None):
    """c(t) = Cov(U_t, U_0) of the stationary process U.

    c(t) = C e^{−θt} I(t) with C = H(2H−1) H^{2H(1−θ)} and
    I(t) = ∫_0^{a_t}∫_0^{a_0} (xy)^{(θ−1)H} |x−y|^{2H−2} dx dy.  Splitting the
    rectangle along y = x and y = (a_t/a_0) x gives, with p = (θ−1)H+1, q = 2H−1,
    x_0 = a_0/a_t = e^{−t/H}:

        2θH · I(t) = a_0^{2θH} B(p, q) + a_t^{2θH} B_inc(p, q, x_0)
                     + a_0^{2θH} ∫_{x_0}^1 w^{−(θ+1)H} (1−w)^{q−1} dw.

    At t = 0 only the first term survives twice over (B_inc(p,q,1) = B(p,q)) and
    c(0) equals :func:`stationary_variance`.
    """
    if not t >= 0:
        raise DomainError(f"lag must be non-negative, got {t!r}")
    th, H = params.theta, params.hurst
    p, q = params.gamma + 1.0, 2 * H - 1.0
    B = beta(p, q)
    if t == 0:
        return stationary_variance(params)
    spec = spec or QuadratureSpec(abs_tol=1e-14, rel_tol=1e-12, max_subdivisions=400)
    x0 = math.exp(-t / H)
    # scale by a_0^{2θH} e^{θt} analytically: e^{−θt} a_t^{2θH} = a_0^{2θH} e^{θt}
    binc = incomplete_beta(p, q, x0)
    if binc > 0:
        second = math.exp(th * t + math.log(binc))
    else:
        second = 0.0
    third = tail_beta(t / H, (th + 1) * H, q, spec)
    C = _alpha_h(H) * H ** (2 * H * (1 - th))
    a0_pow = H ** (2 * th * H)
    return C * a0_pow * (math.exp(-th * t) * (B + third) + second) / (2 * th * H)


# ----------------------------------------------------------------------------
# sampling


def _lamperti_cov(times, H):
    """Covariance of (Z_{t_0}, ξ_0, …, ξ_{n−1}) with ξ_j = e^{−t_j}(B_{a_{t_{j+1}}} − B_{a_{t_j}}).

    Since B_{a_t} = e^t Z_t, ξ_j = e^{Δ_j} Z_{t_{j+1}} − Z_{t_j}: the entries are
    linear combinations of z_cov values and stay O(1) for any horizon.
    """
    t = np.asarray(times, dtype=float)
    R = z_cov(t[:, None] - t[None, :], H)
    e = np.exp(np.diff(t))
    # rows: A R with A[0] = unit, A[j+1] = e_j·row(j+1) − row(j)
    AR = np.empty_like(R)
    AR[0] = R[0]
    AR[1:] = e[:, None] * R[1:] - R[:-1]
    del R
    M = np.empty_like(AR)
    M[:, 0] = AR[:, 0]
    M[:, 1:] = AR[:, 1:] * e[None, :] - AR[:, :-1]
    return 0.5 * (M + M.T)


def _lamperti_cov_uniform(n, step, H):
    lags = z_cov(step * np.arange(n + 2), H)
    e = math.exp(step)
    k = np.arange(n)
    rho_prev = lags[np.abs(k - 1)]
    c_xi = (1 + e * e) * lags[k] - e * (rho_prev + lags[k + 1])
    M = np.empty((n + 1, n + 1))
    M[1:, 1:] = _la.toeplitz(c_xi)
    first = e * lags[1:n + 1] - lags[:n]
    M[0, 0] = lags[0]
    M[0, 1:] = first
    M[1:, 0] = first
    return M


_factor_lock = threading.Lock()
_factor_cache = OrderedDict()
FACTOR_CACHE_BYTES = 1 << 30


def _build_factor(n, step, H):
    try:
        return psd_factor(_lamperti_cov_uniform(n, step, H))
    except FactorizationError as exc:
        raise FactorizationError(
            f"Lamperti covariance on {n + 1} points (step {step}, H={H}) is not PSD: {exc}",
            exc.min_eigenvalue, exc.pivot) from exc


def exact_factor(n, step, H):
    """Cholesky factor of the uniform-grid Lamperti covariance.

    Factors are kept in a least-recently-used cache bounded by
    ``FACTOR_CACHE_BYTES`` (the most recent one is always kept).
    """
    key = (int(n), float(step), float(H))
    with _factor_lock:
        L = _factor_cache.get(key)
        if L is not None:
            _factor_cache.move_to_end(key)
            return L
        L = _build_factor(*key)
        L.setflags(write=False)
        _factor_cache[key] = L
        while len(_factor_cache) > 1 and sum(v.nbytes for v in _factor_cache.values()) > FACTOR_CACHE_BYTES:
            _factor_cache.popitem(last=False)
        return L


@lru_cache(maxsize=4)
def _circulant_spectrum(n, step, H):
    lags = z_cov(step * np.arange(n + 1), H)
    row = np.concatenate([lags, lags[-2:0:-1]])
    return circulant_sqrt_spectrum(row)


def _draw(rng, n, block):
    z = np.asarray(rng.normals(n, block=block), dtype=float)
    if z.shape != (n,):
        raise DomainError(f"random source returned shape {z.shape}, expected ({n},)")
    return z


def _lamperti_exact(n, step, H, rng, block):
    L = exact_factor(n, step, H)
    v = _la.blas.dtrmv(L, _draw(rng, n + 1, block), lower=1)
    return v[0], v[1:]


def _lamperti_stationary(n, step, H, rng, block):
    try:
        with _factor_lock:
            sq = _circulant_spectrum(int(n), float(step), float(H))
    except EmbeddingError as exc:
        log.warning("circulant embedding failed (%s); falling back to the exact route", exc)
        return _lamperti_exact(n, step, H, rng, block)
    m = sq.size
    g = _draw(rng, 2 * m, block)
    w = sq * (g[:m] + 1j * g[m:]) / math.sqrt(m)
    z = np.fft.fft(w).real[: n + 1]
    xi = math.exp(step) * z[1:] - z[:-1]
    return z[0], xi


@dataclass(frozen=True, eq=False)
class FOU2Sample:
    """One simulated draw: X together with the noise it was built from.

    ``fbm`` holds B at the transformed times ``transformed_times`` = {a_{t_i}}.
    """

    grid: TimeGrid
    transformed_times: np.ndarray
    fbm: np.ndarray
    lamperti: np.ndarray
    y1: np.ndarray
    x: np.ndarray

    def x_path(self):
        return SamplePath(self.grid, self.x)


def _recursion(xi, step, theta, scheme):
    phi = math.exp(-theta * step)
    if scheme == "left":
        m = 1.0
    else:
        m = 0.5 * (1.0 + math.exp((theta - 1.0) * step))
    drive = phi * m * xi
    x = np.empty(xi.size + 1)
    x[0] = 0.0
    x[1:] = _signal.lfilter([1.0], [1.0, -phi], drive)
    return x


def simulate_components(params, cfg, rng, block=0):
    """Simulate B at transformed times, Y^{(1)} and X on ``cfg.grid``.

    X_{t_i} = e^{−θ t_i} Σ_{j<i} w_j (B_{a_{t_{j+1}}} − B_{a_{t_j}}) with
    w_j = e^{(θ−1)t_j} (left) or ½(e^{(θ−1)t_j} + e^{(θ−1)t_{j+1}}) (trapezoid), and
    Y^{(1)} uses the matching weights for e^{−s}.  ``rng`` only needs a
    ``normals(n, block=...)`` method.
    """
    n, step, H = cfg.n_steps, cfg.step, params.hurst
    if cfg.sampler == "exact":
        z0, xi = _lamperti_exact(n, step, H, rng, block)
    else:
        z0, xi = _lamperti_stationary(n, step, H, rng, block)
    grid = cfg.grid
    t = grid.times
    e = math.exp(step)
    z = np.empty(n + 1)
    z[0] = z0
    # Z_{j+1} = (Z_j + ξ_j) / e^{Δ}
    z[1:] = _signal.lfilter([1.0 / e], [1.0, -1.0 / e], xi, zi=[z0 / e])[0]
    y_weight = 1.0 if cfg.scheme == "left" else 0.5 * (1.0 + math.exp(-step))
    y1 = np.concatenate([[0.0], np.cumsum(y_weight * xi)])
    x = _recursion(xi, step, params.theta, cfg.scheme)
    a = H * np.exp(t / H)
    return FOU2Sample(grid, a, np.exp(t) * z, z, y1, x)


def simulate_x(params, cfg, rng, block=0):
    """Zero-start fOU₂ path on ``cfg.grid`` (route chosen by ``cfg.sampler``)."""
    return simulate_components(params, cfg, rng, block).x_path()


def simulate_x_stationary_route(params, cfg, rng, block=0):
    """:func:`simulate_x` through circulant embedding of Z (O(n log n))."""
    if cfg.sampler != "stationary":
        cfg = SimConfig(cfg.horizon, cfg.step, cfg.scheme, "stationary")
    return simulate_x(params, cfg, rng, block)


def burn_in(params, step, tol=BURN_IN_TOL):
    """Length t_0, a whole number of steps, with e^{−θ t_0} < tol."""
    return math.ceil(math.log(1.0 / tol) / params.theta / step) * step


def simulate_stationary(params, cfg, rng, block=0):
    """Approximately stationary U on ``[0, cfg.horizon]``.

    A zero-start path is run for an extra burn-in t_0 and its first t_0 units
    discarded.  Y has stationary increments, so this is X started at −t_0, which
    differs from U by e^{−θ(t+t_0)} ξ, below ``BURN_IN_TOL`` in scale.
    """
    t0 = burn_in(params, cfg.step)
    k = int(round(t0 / cfg.step))
    long_cfg = SimConfig(cfg.horizon + t0, cfg.step, cfg.scheme, cfg.sampler)
    x = simulate_components(params, long_cfg, rng, block).x
    return SamplePath(cfg.grid, x[k:])


# ----------------------------------------------------------------------------
# path files


def write_path(path, fh, header=None):
    """Write ``t,value`` rows with 17 significant digits after a ``#`` header line."""
    if header:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in header.items()) + "\n")
    fh.write("t,value\n")
    for t, v in zip(path.times, path.values):
        fh.write(f"{t:.17g},{v:.17g}\n")


def read_path(fh):
    """Inverse of :func:`write_path`; returns ``(SamplePath, header_dict)``."""
    header = {}
    times, values = [], []
    seen_columns = False
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for item in line[1:].split():
                if "=" in item:
                    k, v = item.split("=", 1)
                    header[k] = v
            continue
        if not seen_columns:
            if line.replace(" ", "") != "t,value":
                raise DomainError(f"expected 't,value' column header, got {line!r}")
            seen_columns = True
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise DomainError(f"malformed path row {line!r}")
        times.append(float(parts[0]))
        values.append(float(parts[1]))
    if not times:
        raise DomainError("path file has no data rows")
    return SamplePath(TimeGrid(np.array(times)), np.array(values)), header
