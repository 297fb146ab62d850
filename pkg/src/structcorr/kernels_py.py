"""Pure-python (numpy) implementations of the numerical hot kernels.

This is the fallback backend; ``structcorr._kernels`` is the compiled
twin with identical signatures and semantics.  Keep the two in sync --
``tests/test_kernels.py`` cross-checks them.
"""

import numpy as np
from scipy.linalg import solve_triangular

BACKEND = "python"

LOG_2PI = float(np.log(2.0 * np.pi))


def try_cholesky(a, tol=1e-10):
    """Lower Cholesky factor of ``a``, or None if any pivot is <= tol.

    The pivot is the squared diagonal entry (the value before the square
    root), so the tolerance is comparable across backends.
    """
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return None
    d = np.diagonal(chol)
    if np.min(d * d) <= tol:
        return None
    return chol


def is_pd(a, tol=1e-10):
    """Whether symmetric ``a`` factors with every Cholesky pivot > tol."""
    return try_cholesky(a, tol) is not None


def det_lu(a):
    """Determinant of a general square matrix."""
    return float(np.linalg.det(a))


def barnard_coeffs(r, idx, i, j):
    """Quadratic coefficients (a, b, c) of det(sub(x)) = a x^2 + b x + c.

    ``sub`` is the principal submatrix ``r[idx][:, idx]`` and ``x`` is the
    value substituted at its (i, j) and (j, i) cells.  The coefficients are
    recovered from the determinants at x = 1, -1 and 0.
    """
    sub = np.ascontiguousarray(r[np.ix_(idx, idx)])
    dets = np.empty(3)
    for t, x in enumerate((1.0, -1.0, 0.0)):
        sub[i, j] = sub[j, i] = x
        dets[t] = np.linalg.det(sub)
    a = 0.5 * (dets[0] + dets[1]) - dets[2]
    b = 0.5 * (dets[0] - dets[1])
    return float(a), float(b), float(dets[2])


def mvn_pattern_loglik(sigma, idx, yc, tol=1e-10):
    """Gaussian log-likelihood of centered rows ``yc`` under ``sigma[idx, idx]``.

    ``yc`` has one row per subject sharing the observation pattern ``idx``
    (already centered at the observed means).  Returns -inf when the
    projected covariance fails the Cholesky tolerance.
    """
    sub = sigma[np.ix_(idx, idx)]
    chol = try_cholesky(sub, tol)
    if chol is None:
        return -np.inf
    n, d = yc.shape
    z = solve_triangular(chol, yc.T, lower=True, check_finite=False)
    quad = float(np.einsum("ij,ij->", z, z))
    logdet = 2.0 * float(np.sum(np.log(np.diagonal(chol))))
    return -0.5 * (n * d * LOG_2PI + n * logdet + quad)
