"""Drift estimators for the fOU₂ process and the asymptotic variance σ²(θ, H).

* moment: inverts the ergodic limit (1/T)∫X² → g(θ) = stationary variance;
* lse-corrected: least squares, with the Skorokhod integral replaced by the
  path-wise one plus the deterministic correction evaluated at the true θ;
* pathwise: least squares with the path-wise integral, which tends to 0.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import BracketError, DegeneratePathError, DomainError, EstimatorRangeError
from .fbm import SamplePath, TimeGrid, check_hurst
from .model import (ModelParams, SimConfig, beta_core, correction_limit, simulate_x,
                    stationary_variance, tail_beta)
from .numerics import (QuadratureSpec, RngStream, beta, find_root_bracketed, incomplete_beta,
                       integrate_power_weight, integrate_with_error)

ESTIMATORS = ("moment", "lse-corrected", "pathwise")
DEFAULT_BRACKET = (1.01, 50.0)


@dataclass(frozen=True)
class EstimateResult:
    """Outcome of one estimator on one path.

    ``denominator`` is (1/T)∫X² dt; ``correction`` is the Skorokhod correction
    (0 for the other estimators).
    """

    label: str
    theta_hat: float
    denominator: float
    correction: float
    horizon: float

    def __post_init__(self):
        if not self.denominator > 0:
            raise DegeneratePathError(f"denominator must be positive, got {self.denominator!r}")
        if not math.isfinite(self.theta_hat):
            raise DegeneratePathError(f"non-finite estimate {self.theta_hat!r}")


@dataclass(frozen=True)
class VarianceResult:
    sigma_squared: float
    error_bound: float

    def __post_init__(self):
        if not self.sigma_squared > 0:
            raise DomainError(f"sigma_squared must be positive, got {self.sigma_squared!r}")


def _check_path(path):
    if not isinstance(path, SamplePath):
        raise DomainError(f"expected a SamplePath, got {type(path).__name__}")
    if len(path) < 2:
        raise DomainError("path functionals need at least two observations")
    return path


def _integral_sq(path):
    v = path.values
    return float(np.trapezoid(v * v, path.times))


def quadratic_functional(path):
    """Trapezoid value of (1/T)∫ X_t² dt over the path's time span."""
    _check_path(path)
    span = path.times[-1] - path.times[0]
    return _integral_sq(path) / span


@lru_cache(maxsize=64)
def _checked_decreasing(H, lo, hi, n=64):
    # g(θ) decreases on the bracket; verified once per (H, bracket) on a log grid
    grid = np.geomspace(lo, hi, n)
    vals = [stationary_variance(ModelParams(float(th), H)) for th in grid]
    if not all(b < a for a, b in zip(vals, vals[1:])):
        raise BracketError(f"stationary variance is not decreasing on [{lo}, {hi}] at H={H}")
    return vals[0], vals[-1]


def estimate_moment(path, H, bracket=DEFAULT_BRACKET, tol=1e-12):
    """Solve g(θ̂) = (1/T)∫X² for θ̂ on ``bracket``, g the stationary variance.

    ``path`` may also be a positive scalar, taken as the value of the functional
    itself (horizon reported as NaN).
    """
    H = check_hurst(H, 0.5)
    lo, hi = (float(b) for b in bracket)
    if not (1 < lo < hi):
        raise BracketError(f"bracket must satisfy 1 < lo < hi, got {bracket!r}")
    if isinstance(path, SamplePath):
        q = quadratic_functional(path)
        horizon = float(path.times[-1] - path.times[0])
    else:
        q, horizon = float(path), float("nan")
    if not q > 0:
        raise DegeneratePathError("quadratic functional vanishes; the path is identically zero")
    g_lo, g_hi = _checked_decreasing(H, lo, hi)
    if not g_hi <= q <= g_lo:
        raise EstimatorRangeError(
            f"(1/T)∫X² = {q:.6g} outside the achievable range [{g_hi:.6g}, {g_lo:.6g}] "
            f"for θ in [{lo}, {hi}]", (g_hi, g_lo))
    if q == g_lo:
        th = lo
    elif q == g_hi:
        th = hi
    else:
        th = find_root_bracketed(lambda x: stationary_variance(ModelParams(x, H)) - q, lo, hi, tol)
    return EstimateResult("moment", th, q, 0.0, horizon)


_CORR_SPEC = QuadratureSpec(abs_tol=1e-10, rel_tol=1e-10, max_subdivisions=400)


def correction_with_error(T, params, spec=_CORR_SPEC):
    """Skorokhod correction and its quadrature error bound.

    α_H H^{2H} ∫_{a_0}^{a_T} q^{−1} ∫_{H/q}^{1} y^{(θ−1)H} (1−y)^{2H−2} dy dq, computed
    in log time q = a_u (dq/q = du/H).  The inner integral runs in the distance
    to y = 1, which carries the (1−y)^{2H−2} endpoint singularity.
    """
    if not T > 0:
        raise DomainError(f"horizon must be positive, got {T!r}")
    H, g = params.hurst, params.gamma
    inner_spec = QuadratureSpec(spec.abs_tol * 1e-2, spec.rel_tol * 1e-2, spec.max_subdivisions)

    def inner(u):
        return integrate_power_weight(lambda d: (1.0 - d) ** g, -math.expm1(-u / H),
                                      2 * H - 2, inner_spec)

    # the integrand rises like u^{2H−1} from 0 and is flat after a few units of H
    knee = min(T, 20.0 * H)
    outer = spec.with_singularities([0.0, knee], [2 * H - 1, None])
    val, err = integrate_with_error(inner, 0.0, T, outer)
    scale = H * (2 * H - 1) * H ** (2 * H - 1)
    return scale * val, scale * (err + inner_spec.rel_tol * abs(val))


def skorokhod_correction(T, params, spec=_CORR_SPEC):
    """Deterministic correction E[∫X dX] − E[∫X δX] on [0, T] (grows like T·limit)."""
    return correction_with_error(T, params, spec)[0]


def _endpoint_term(path):
    v = path.values
    return 0.5 * (v[-1] * v[-1] - v[0] * v[0])


def estimate_lse_corrected(path, params, correction=None):
    """θ̂ = [−½X_T² + correction(T)] / ∫X² dt with the correction at ``params``.

    ``correction`` may be passed in to reuse a value across replicates sharing T.
    """
    _check_path(path)
    den = _integral_sq(path)
    if not den > 0:
        raise DegeneratePathError("∫X² dt vanishes; the path is identically zero")
    T = float(path.times[-1] - path.times[0])
    corr = skorokhod_correction(T, params) if correction is None else float(correction)
    th = (-_endpoint_term(path) + corr) / den
    return EstimateResult("lse-corrected", th, den / T, corr, T)


def estimate_lse_iterated(path, H, bracket=DEFAULT_BRACKET, tol=1e-8, max_iter=100):
    """Fixed point θ = lse(path; correction at θ), started at the moment estimate.

    No convergence guarantee; raises :class:`EstimatorRangeError` if an iterate
    leaves ``bracket`` and :class:`RuntimeError` without convergence.
    """
    th = estimate_moment(path, H, bracket).theta_hat
    for _ in range(max_iter):
        res = estimate_lse_corrected(path, ModelParams(th, H))
        nxt = res.theta_hat
        if not bracket[0] <= nxt <= bracket[1]:
            raise EstimatorRangeError(f"iterate {nxt:.6g} left the bracket {bracket}", tuple(bracket))
        if abs(nxt - th) <= tol * max(1.0, abs(th)):
            return EstimateResult("lse-iterated", nxt, res.denominator, res.correction, res.horizon)
        th = nxt
    raise RuntimeError(f"fixed-point iteration did not converge in {max_iter} steps")


def estimate_pathwise(path):
    """θ̂′ = −∫X dX / ∫X² dt with ∫X dX = ½(X_T² − X_0²), the exact trapezoid sum."""
    _check_path(path)
    den = _integral_sq(path)
    if not den > 0:
        raise DegeneratePathError("∫X² dt vanishes; the path is identically zero")
    T = float(path.times[-1] - path.times[0])
    return EstimateResult("pathwise", -_endpoint_term(path) / den, den / T, 0.0, T)


def trapezoid_stieltjes(path):
    """Σ ½(X_i + X_{i+1})(X_{i+1} − X_i); telescopes to ½(X_T² − X_0²)."""
    v = path.values
    return float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(v)))


def apply_estimator(label, path, params=None, hurst=None, correction=None,
                    bracket=DEFAULT_BRACKET):
    """Dispatch on an estimator label."""
    if label == "moment":
        H = hurst if hurst is not None else params.hurst
        return estimate_moment(path, H, bracket)
    if label == "lse-corrected":
        if params is None:
            raise DomainError("lse-corrected needs the model parameters for its correction")
        return estimate_lse_corrected(path, params, correction)
    if label == "pathwise":
        return estimate_pathwise(path)
    raise DomainError(f"unknown estimator {label!r}; expected one of {ESTIMATORS}")


# ----------------------------------------------------------------------------
# asymptotic variance

_VAR_SPEC = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-9, max_subdivisions=400)


def _cube_factors(a, params, spec):
    """A(a) and C(a) of the variance integrand after a = e^{−x/H}, b = e^{−y/H}, c = e^{−z/H}.

    A(a) = ∫_0^1 b^{(θ−1)H} |b−a|^{2H−2} db,
    C(a) = ∫_0^1 c^{−H} (1−c)^{2H−2} (min(a,c)/max(a,c))^{θH} dc,
    each split at the kink b = a or c = a; the pieces reduce to incomplete Beta
    integrals and the tail ∫_{x0}^1 w^{−k}(1−w)^{2H−2} dw.
    """
    th, H, g = params.theta, params.hurst, params.gamma
    q = 2 * H - 1
    lam = -math.log(a)
    pa = a ** (g + q)
    A = pa * (beta(g + 1, q) + tail_beta(lam, g + q + 1, q, spec))
    C = (a ** (-th * H) * incomplete_beta(g + 1, q, a)
         + a ** (th * H) * tail_beta(lam, (th + 1) * H, q, spec))
    return A, C


def _variance_integral(params, spec, drop_kernel):
    H = params.hurst
    q = 2 * H - 1
    c_free = beta(1 - H, q)

    def f(a):
        A, C = _cube_factors(a, params, spec)
        return a ** (-H) * A * (c_free if drop_kernel else C)

    # near a = 0 the integrand behaves like a^{1−2H} (or a^{−H} without the kernel)
    expo = -H if drop_kernel else 1 - 2 * H
    outer = QuadratureSpec(spec.abs_tol, spec.rel_tol * 10, spec.max_subdivisions,
                           (0.0, 1.0), (expo, None))
    val, err = integrate_with_error(f, 0.0, 1.0, outer)
    return H ** 3 * val, H ** 3 * (err + spec.rel_tol * abs(val))


def _variance_prefactor(params):
    return 2 * params.theta ** 2 / (params.hurst ** 2 * beta_core(params) ** 2)


def asymptotic_variance(params, spec=_VAR_SPEC):
    """σ²(θ, H) of the CLT for √T(θ̂_T − θ).

    The prefactor 2θ²/(H² B((θ−1)H+1, 2H−1)²) multiplies the triple integral over
    [0,∞)³ of e^{−θy} e^{−θ|z−x|} [|e^{−y/H} − e^{−x/H}| |1 − e^{−z/H}|]^{2H−2}
    (with its exponential weights), mapped to the unit cube by a = e^{−x/H},
    b = e^{−y/H}, c = e^{−z/H} where it becomes H³ ∫_0^1 a^{−H} A(a) C(a) da.
    """
    j, err = _variance_integral(params, spec, False)
    pre = _variance_prefactor(params)
    return VarianceResult(pre * j, pre * err)


def asymptotic_variance_upper_bound(params, spec=_VAR_SPEC):
    """σ² with the factor e^{−θ|z−x|} replaced by its bound 1."""
    j, err = _variance_integral(params, spec, True)
    pre = _variance_prefactor(params)
    return VarianceResult(pre * j, pre * err)


# ----------------------------------------------------------------------------
# scikit-learn style wrappers


def check_paths(X, step=None, start=0.0):
    """Coerce ``X`` into a list of :class:`SamplePath`.

    ``X`` is a :class:`SamplePath`, a sequence of them, or a 2-D array with one
    path per row observed on the uniform grid ``start + step·k`` (``step`` required).
    """
    if isinstance(X, SamplePath):
        return [X]
    if isinstance(X, (list, tuple)) and X and all(isinstance(p, SamplePath) for p in X):
        return list(X)
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise DomainError(f"expected paths as rows of a 2-D array, got shape {arr.shape}")
    if step is None or not step > 0:
        raise DomainError("array input needs a positive step")
    grid = TimeGrid(start + step * np.arange(arr.shape[1]))
    return [SamplePath(grid, row) for row in arr]


def check_params(theta, hurst):
    """Build :class:`ModelParams`, re-raising domain errors with both values named."""
    try:
        return ModelParams(theta, hurst)
    except DomainError as exc:
        raise DomainError(f"invalid model parameters (theta={theta!r}, hurst={hurst!r}): {exc}") from exc


class DriftEstimator(TransformerMixin, BaseEstimator):
    """Drift estimates θ̂ for a batch of paths.

    Parameters
    ----------
    estimator : {"moment", "lse-corrected", "pathwise"}
    hurst : float
        Hurst index, assumed known.
    theta : float, optional
        True drift; required by "lse-corrected" for its correction term.
    bracket : tuple
        Root bracket of the moment estimator.
    step : float, optional
        Sampling step when paths are passed as array rows.

    Attributes
    ----------
    results_ : list of EstimateResult
    theta_hat_ : ndarray
    """

    def __init__(self, estimator="moment", hurst=0.7, theta=None, bracket=DEFAULT_BRACKET,
                 step=None):
        self.estimator = estimator
        self.hurst = hurst
        self.theta = theta
        self.bracket = bracket
        self.step = step

    def _estimate(self, X):
        if self.estimator not in ESTIMATORS:
            raise DomainError(f"unknown estimator {self.estimator!r}; expected one of {ESTIMATORS}")
        paths = check_paths(X, self.step)
        params = None
        if self.estimator == "lse-corrected":
            if self.theta is None:
                raise DomainError("lse-corrected needs theta for its correction term")
            params = check_params(self.theta, self.hurst)
        cache = {}
        out = []
        for p in paths:
            corr = None
            if params is not None:
                T = float(p.times[-1] - p.times[0])
                if T not in cache:
                    cache[T] = skorokhod_correction(T, params)
                corr = cache[T]
            out.append(apply_estimator(self.estimator, p, params, self.hurst, corr, self.bracket))
        return out

    def fit(self, X, y=None):
        self.results_ = self._estimate(X)
        self.theta_hat_ = np.array([r.theta_hat for r in self.results_])
        self.n_paths_ = len(self.results_)
        return self

    def transform(self, X):
        """Column of θ̂, one row per path."""
        return np.array([[r.theta_hat] for r in self._estimate(X)])


class FOU2Simulator(BaseEstimator):
    """Draw zero-start fOU₂ paths as rows of an array.

    Replicate ``r`` uses ``RngStream(seed, r)``, so the rows do not depend on how
    many are requested.
    """

    def __init__(self, theta=2.0, hurst=0.7, horizon=5.0, step=0.025, scheme="trapezoid",
                 sampler="exact", seed=0):
        self.theta = theta
        self.hurst = hurst
        self.horizon = horizon
        self.step = step
        self.scheme = scheme
        self.sampler = sampler
        self.seed = seed

    def sample(self, n_paths, start=0):
        params = check_params(self.theta, self.hurst)
        cfg = SimConfig(self.horizon, self.step, self.scheme, self.sampler)
        rows = [simulate_x(params, cfg, RngStream(self.seed, start + r)).values
                for r in range(int(n_paths))]
        return np.vstack(rows)


__all__ = [
    "ESTIMATORS", "DEFAULT_BRACKET", "EstimateResult", "VarianceResult", "quadratic_functional",
    "estimate_moment", "skorokhod_correction", "correction_with_error", "correction_limit",
    "estimate_lse_corrected", "estimate_lse_iterated", "estimate_pathwise", "trapezoid_stieltjes",
    "apply_estimator", "asymptotic_variance", "asymptotic_variance_upper_bound", "check_paths",
    "check_params", "DriftEstimator", "FOU2Simulator",
]
