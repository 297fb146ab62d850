"""Numerical kernel backend selection.

The compiled extension (``structcorr._kernels``) is preferred when it is
importable; otherwise the pure-numpy twin is used.  Set
``STRUCTCORR_BACKEND=python`` or ``STRUCTCORR_BACKEND=compiled`` to force
a choice (forcing ``compiled`` raises if the extension is missing).
"""

import os

from . import kernels_py

_requested = os.environ.get("STRUCTCORR_BACKEND", "").strip().lower()

if _requested in ("", "compiled", "c"):
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested:
            raise ImportError(
                "STRUCTCORR_BACKEND=compiled but the structcorr._kernels "
                "extension is not built; reinstall with Cython available"
            )
        _impl = kernels_py
elif _requested in ("python", "pure"):
    _impl = kernels_py
else:
    raise ImportError(f"unknown STRUCTCORR_BACKEND value: {_requested!r}")

BACKEND = _impl.BACKEND
try_cholesky = _impl.try_cholesky
is_pd = _impl.is_pd
det_lu = _impl.det_lu
barnard_coeffs = _impl.barnard_coeffs
mvn_pattern_loglik = _impl.mvn_pattern_loglik
