import math

from scipy import optimize as _opt

from ..exceptions import BracketError


def find_root_bracketed(g, lo, hi, tol=1e-12):
    """Root of ``g`` in ``[lo, hi]`` by Brent's method.

    Brent's method keeps a sign-changing bracket at every step and takes
    secant/inverse-quadratic steps only when they stay inside it, falling back
    to bisection otherwise, so it tolerates evaluation noise at the tolerance
    level.  The returned ``x`` lies in a final bracket of width ``<= tol``.
    """
    if not lo < hi:
        raise BracketError(f"empty bracket [{lo!r}, {hi!r}]")
    glo, ghi = g(lo), g(hi)
    for x, gx in ((lo, glo), (hi, ghi)):
        if not math.isfinite(gx):
            raise FloatingPointError(f"non-finite value g({x!r}) = {gx!r}")
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if (glo > 0) == (ghi > 0):
        raise BracketError(f"no sign change on [{lo!r}, {hi!r}]: g = ({glo!r}, {ghi!r})")

    def checked(x):
        gx = g(x)
        if not math.isfinite(gx):
            raise FloatingPointError(f"non-finite value g({x!r}) = {gx!r}")
        return gx

    # xtol is absolute; rtol is the tightest scipy accepts
    return _opt.brentq(checked, lo, hi, xtol=tol, rtol=4 * 2.220446049250313e-16, maxiter=500)
