"""Adaptive 1-D quadrature with declared algebraic singularities.

The interval is cut at every declared singular point.  A piece that touches a
singular point with a known exponent ``beta`` is mapped by the power change of
variables ``x - p = L * w**(1/(1+beta))``, which turns ``(x-p)**beta dx`` into a
constant multiple of ``dw`` so the transformed integrand is bounded.  Pieces
that touch a singular point without a known exponent are left to the
Gauss-Kronrod/epsilon-extrapolation scheme of QUADPACK (``scipy.integrate.quad``),
which converges for integrable algebraic endpoint singularities.

The substitution is exact in the distance ``x - p`` only when ``p`` is 0; for a
singular point away from the origin the distance is rounded relative to ``|p|``.
Integrands of the form ``d**beta * h(d)`` should therefore go through
:func:`integrate_power_weight`, which receives the distance itself.
"""

from dataclasses import dataclass, field
import math
import warnings

from scipy import integrate as _integrate

from ..exceptions import DomainError, QuadratureError


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and singularity layout for :func:`integrate`.

    ``singularities`` holds abscissae of interior or endpoint singularities;
    ``exponents`` (same length, entries may be ``None``) gives the algebraic
    exponent ``beta > -1`` of ``|x - p|**beta`` at each point when known.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 200
    singularities: tuple = ()
    exponents: tuple = field(default=())

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be a positive integer")
        if self.exponents and len(self.exponents) != len(self.singularities):
            raise DomainError("exponents must match singularities in length")
        for beta in self.exponents:
            if beta is not None and not beta > -1:
                raise DomainError(f"singularity exponent must exceed -1, got {beta!r}")

    def with_singularities(self, points, exponents=None):
        """Copy with a replaced singularity layout."""
        points = tuple(points)
        exps = tuple(exponents) if exponents is not None else (None,) * len(points)
        return QuadratureSpec(self.abs_tol, self.rel_tol, self.max_subdivisions, points, exps)


DEFAULT_SPEC = QuadratureSpec()


def _quad(f, a, b, spec, tol_abs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _integrate.IntegrationWarning)
        out = _integrate.quad(f, a, b, epsabs=tol_abs, epsrel=spec.rel_tol,
                              limit=spec.max_subdivisions, full_output=1)
    return out[0], out[1]


def _piece(f, a, b, beta_left, beta_right, spec, tol_abs):
    """Integrate f on [a, b] with optional known exponents at either end."""
    if beta_left is not None and beta_right is not None:
        mid = 0.5 * (a + b)
        v1, e1 = _piece(f, a, mid, beta_left, None, spec, 0.5 * tol_abs)
        v2, e2 = _piece(f, mid, b, None, beta_right, spec, 0.5 * tol_abs)
        return v1 + v2, e1 + e2
    length = b - a
    if beta_left is not None:
        m = 1.0 / (1.0 + beta_left)

        def g(w):
            return f(a + length * w ** m) * length * m * w ** (m - 1.0)

        return _quad(g, 0.0, 1.0, spec, tol_abs)
    if beta_right is not None:
        m = 1.0 / (1.0 + beta_right)

        def g(w):
            return f(b - length * w ** m) * length * m * w ** (m - 1.0)

        return _quad(g, 0.0, 1.0, spec, tol_abs)
    return _quad(f, a, b, spec, tol_abs)


def integrate_power_weight(h, length, beta, spec=DEFAULT_SPEC, breaks=()):
    """∫_0^L d^β h(d) dd for piecewise-smooth ``h`` and ``beta > -1``.

    With d = L w^{1/(1+β)} the weight is absorbed exactly:
    the integral equals L^{1+β}/(1+β) ∫_0^1 h(L w^{1/(1+β)}) dw.
    ``breaks`` lists distances in (0, L) where ``h`` jumps.
    """
    if not beta > -1:
        raise DomainError(f"power-weight exponent must exceed -1, got {beta!r}")
    if not length >= 0:
        raise DomainError(f"interval length must be non-negative, got {length!r}")
    if length == 0:
        return 0.0
    m = 1.0 / (1.0 + beta)
    scale = length ** (1.0 + beta) * m
    cuts = sorted({(d / length) ** (1.0 + beta) for d in breaks if 0 < d < length})
    plain = QuadratureSpec(spec.abs_tol / scale, spec.rel_tol, spec.max_subdivisions,
                           tuple(cuts), (None,) * len(cuts))
    return scale * integrate(lambda w: h(length * w ** m), 0.0, 1.0, plain)


def integrate(f, a, b, spec=DEFAULT_SPEC):
    """Integrate ``f`` over ``[a, b]``.

    Returns the estimate.  Raises :class:`QuadratureError` carrying the best
    estimate and its error bound if ``max(abs_tol, rel_tol*|value|)`` is not met.
    """
    if math.isnan(a) or math.isnan(b) or a > b:
        raise DomainError(f"integrate requires a <= b, got [{a!r}, {b!r}]")
    return integrate_with_error(f, a, b, spec)[0]


def integrate_with_error(f, a, b, spec=DEFAULT_SPEC):
    """Like :func:`integrate` but also returns the accumulated error bound."""
    if a > b:
        raise DomainError(f"integrate requires a <= b, got [{a!r}, {b!r}]")
    if a == b:
        return 0.0, 0.0
    exps = spec.exponents or (None,) * len(spec.singularities)
    known = {}
    for p, beta in zip(spec.singularities, exps):
        if not a <= p <= b:
            raise DomainError(f"singularity {p!r} outside [{a!r}, {b!r}]")
        known[float(p)] = beta if known.get(float(p)) is None else known[float(p)]
    nodes = sorted(set([float(a), float(b)]) | set(known))
    pieces = list(zip(nodes[:-1], nodes[1:]))
    tol_abs = spec.abs_tol / len(pieces)
    total = 0.0
    total_err = 0.0
    for lo, hi in pieces:
        v, e = _piece(f, lo, hi, known.get(lo), known.get(hi), spec, tol_abs)
        total += v
        total_err += e
    if not math.isfinite(total):
        raise QuadratureError("non-finite quadrature value", total, total_err)
    if total_err > max(spec.abs_tol, spec.rel_tol * abs(total)):
        raise QuadratureError("subdivision budget exhausted", total, total_err)
    return total, total_err
