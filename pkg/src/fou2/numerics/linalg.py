"""Cholesky factorization with ridge retry and circulant spectra."""

import logging

import numpy as np
from scipy import linalg as _la

from ..exceptions import DomainError, EmbeddingError, FactorizationError

log = logging.getLogger(__name__)

RIDGE_FACTOR = 1e-12


def psd_factor(m):
    """Lower-triangular ``L`` with ``L @ L.T ~= m`` for a symmetric PSD matrix.

    On a failed first pivot sequence a ridge of ``1e-12 * trace(m) / n`` is added
    to the diagonal and the factorization is retried once.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"psd_factor requires a square matrix, got shape {m.shape}")
    n = m.shape[0]
    if n == 0:
        return m.copy()
    if not np.all(np.isfinite(m)):
        raise DomainError("psd_factor requires a finite matrix")
    scale = max(np.max(np.abs(m)), np.finfo(float).tiny)
    if np.max(np.abs(m - m.T)) > 1e-10 * scale:
        raise DomainError("psd_factor requires a symmetric matrix")
    c, info = _la.lapack.dpotrf(m, lower=1, clean=1, overwrite_a=0)
    if info == 0:
        return c
    ridge = RIDGE_FACTOR * np.trace(m) / n
    log.debug("cholesky pivot %d failed; retrying with ridge %.3g", info, ridge)
    c, info2 = _la.lapack.dpotrf(m + ridge * np.eye(n), lower=1, clean=1, overwrite_a=0)
    if info2 == 0:
        return c
    min_eig = float(np.linalg.eigvalsh(m)[0])
    raise FactorizationError(
        f"matrix is indefinite beyond ridge {ridge:.3g}: pivot {info2} failed, "
        f"most negative eigenvalue {min_eig:.6g}",
        min_eigenvalue=min_eig, pivot=int(info2))


def circulant_sqrt_spectrum(first_row, eps=None):
    """Square roots of the eigenvalues of the symmetric circulant with ``first_row``.

    Eigenvalues in ``[-eps, 0)`` are rounding noise and clipped to zero; anything
    more negative raises :class:`EmbeddingError` so the caller can fall back to a
    direct factorization.  ``eps`` defaults to ``1e-10 * max|eigenvalue|``.
    """
    row = np.asarray(first_row, dtype=float)
    if row.ndim != 1 or row.size == 0:
        raise DomainError("first_row must be a non-empty vector")
    lam = np.fft.fft(row).real
    if eps is None:
        eps = 1e-10 * max(np.max(np.abs(lam)), np.finfo(float).tiny)
    lo = float(lam.min())
    if lo < -eps:
        raise EmbeddingError(f"circulant embedding has negative eigenvalue {lo:.6g}", lo)
    return np.sqrt(np.clip(lam, 0.0, None))
