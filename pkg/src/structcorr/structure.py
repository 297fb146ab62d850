"""Structured correlation matrix: parameter indexing, assembly, projections.

The model ties every cell of a ``p x p`` correlation matrix (``p = J*L``
for ``J`` measurement times and ``L`` outcomes) to one of ``q`` unique
parameters:

* ``eta.a.b`` -- two different outcomes at the same time,
* ``rho.a``  -- the same outcome at two different times,
* ``gamma``  -- different outcomes at different times.

Times are exchangeable, so any two distinct times share identical cross
blocks.  Outcomes are laid out time-major: the flat index of outcome
``l`` at time ``j`` is ``(j-1)*L + l`` (1-based).
"""

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DataValidationError, NotPositiveDefiniteError
from . import kernels

#: Returned by :func:`index_param` for diagonal cells.
UNIT = "unit"

DEFAULT_PD_TOL = 1e-10


@dataclass(frozen=True)
class StructureSpec:
    """Dimensions of the structured correlation matrix.

    Parameters
    ----------
    n_outcomes : int
        Outcomes measured at each time (``L``), at least 2.
    n_times : int
        Maximum number of measurement times across subjects (``J``).
    """

    n_outcomes: int
    n_times: int

    def __post_init__(self):
        if self.n_outcomes < 2:
            raise DataValidationError("need at least 2 outcomes per time")
        if self.n_times < 1:
            raise DataValidationError("need at least 1 measurement time")

    @property
    def dim(self):
        """Total flat dimension ``p = J * L``."""
        return self.n_times * self.n_outcomes

    @property
    def n_params(self):
        """Count of unique correlation parameters ``q``.

        ``C(L,2) + L + 1`` in general; with a single time the rho and
        gamma parameters do not exist and ``q`` reduces to ``C(L,2)``.
        """
        n_eta = self.n_outcomes * (self.n_outcomes - 1) // 2
        if self.n_times == 1:
            return n_eta
        return n_eta + self.n_outcomes + 1

    @property
    def eta_pairs(self):
        """Unordered outcome pairs (1-based) in parameter order."""
        return list(itertools.combinations(range(1, self.n_outcomes + 1), 2))

    @property
    def param_names(self):
        """Unique parameter names in canonical order (etas, rhos, gamma)."""
        names = [f"eta.{a}.{b}" for a, b in self.eta_pairs]
        if self.n_times > 1:
            names += [f"rho.{a}" for a in range(1, self.n_outcomes + 1)]
            names.append("gamma")
        return names


def index_param(spec, m, n):
    """Name of the unique parameter at cell (m, n) of the full matrix.

    ``m`` and ``n`` are 1-based flat outcome indices; the diagonal maps to
    :data:`UNIT`.  Symmetric in its arguments.
    """
    p = spec.dim
    if not (1 <= m <= p and 1 <= n <= p):
        raise DataValidationError(f"flat index out of range 1..{p}: ({m}, {n})")
    if m == n:
        return UNIT
    jm, lm = divmod(m - 1, spec.n_outcomes)
    jn, ln = divmod(n - 1, spec.n_outcomes)
    if jm == jn:
        a, b = sorted((lm + 1, ln + 1))
        return f"eta.{a}.{b}"
    if lm == ln:
        return f"rho.{lm + 1}"
    return "gamma"


@lru_cache(maxsize=None)
def param_index_map(n_outcomes, n_times):
    """(p, p) integer map of cells to parameter positions; diagonal is -1.

    Positions follow :attr:`StructureSpec.param_names`, so maps for
    different time counts agree on the parameters they share.
    """
    spec = StructureSpec(n_outcomes, n_times)
    order = {name: k for k, name in enumerate(spec.param_names)}
    p = spec.dim
    out = np.full((p, p), -1, dtype=np.intp)
    for m in range(1, p + 1):
        for n in range(m + 1, p + 1):
            k = order[index_param(spec, m, n)]
            out[m - 1, n - 1] = out[n - 1, m - 1] = k
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class CorrelationParams:
    """The q unique correlations: etas by outcome pair, rhos, gamma."""

    eta: np.ndarray
    rho: np.ndarray
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float))
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=float))
        vals = np.concatenate([self.eta, self.rho, [self.gamma]])
        if vals.size and (np.max(np.abs(vals)) >= 1.0 or not np.all(np.isfinite(vals))):
            raise DataValidationError("correlations must lie strictly inside (-1, 1)")

    @classmethod
    def zeros(cls, n_outcomes):
        n_eta = n_outcomes * (n_outcomes - 1) // 2
        return cls(np.zeros(n_eta), np.zeros(n_outcomes), 0.0)

    @classmethod
    def from_vector(cls, spec, r):
        """Build from the flat parameter vector in canonical order."""
        r = np.asarray(r, dtype=float)
        if r.shape != (spec.n_params,):
            raise DataValidationError(
                f"expected {spec.n_params} parameters, got {r.shape}"
            )
        n_eta = len(spec.eta_pairs)
        if spec.n_times == 1:
            return cls(r[:n_eta], np.zeros(spec.n_outcomes), 0.0)
        return cls(r[:n_eta], r[n_eta : n_eta + spec.n_outcomes], float(r[-1]))

    def as_vector(self, spec):
        """Flat parameter vector in canonical order for ``spec``."""
        if spec.n_times == 1:
            return self.eta.copy()
        return np.concatenate([self.eta, self.rho, [self.gamma]])


@dataclass(frozen=True)
class MomentParams:
    """Per-outcome means and standard deviations (shared across times)."""

    means: np.ndarray
    sds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", np.asarray(self.means, dtype=float))
        object.__setattr__(self, "sds", np.asarray(self.sds, dtype=float))
        if self.means.shape != self.sds.shape:
            raise DataValidationError("means and sds must have equal length")
        if not np.all(self.sds > 0):
            raise DataValidationError("standard deviations must be positive")


def assemble_correlation(spec, params, n_times_use=None):
    """Dense structured correlation matrix for the leading time blocks.

    ``n_times_use`` defaults to ``spec.n_times``; smaller values build the
    leading principal block used for subjects with fewer times.
    """
    j_use = spec.n_times if n_times_use is None else n_times_use
    if not (1 <= j_use <= spec.n_times):
        raise DataValidationError(f"n_times_use out of range 1..{spec.n_times}")
    r = params.as_vector(StructureSpec(spec.n_outcomes, j_use))
    cell_map = param_index_map(spec.n_outcomes, j_use)
    # index -1 (the diagonal) picks up the appended 1.0
    return np.ascontiguousarray(np.concatenate([r, [1.0]])[cell_map])


def assemble_covariance(moments, corr):
    """Covariance ``S R S`` with ``S`` the tiled diagonal of per-outcome sds."""
    corr = np.asarray(corr, dtype=float)
    n_out = moments.sds.shape[0]
    if corr.shape[0] % n_out:
        raise DataValidationError("correlation dimension is not a multiple of L")
    s_full = np.tile(moments.sds, corr.shape[0] // n_out)
    return corr * np.outer(s_full, s_full)


def tile_means(moments, n_times):
    """Full mean vector: the per-outcome means repeated per time block."""
    return np.tile(moments.means, n_times)


@dataclass(frozen=True)
class ModelState:
    """Current sampler state: means, sds and unique correlations."""

    moments: MomentParams
    corr: CorrelationParams

    @property
    def means(self):
        return self.moments.means

    @property
    def sds(self):
        return self.moments.sds

    def correlation_matrix(self, spec, n_times_use=None):
        return assemble_correlation(spec, self.corr, n_times_use)

    def covariance_matrix(self, spec, n_times_use=None):
        return assemble_covariance(
            self.moments, self.correlation_matrix(spec, n_times_use)
        )


def observed_projection(subject, mean_full, sigma_full):
    """Subvector and principal submatrix for a subject's observed cells.

    ``mean_full``/``sigma_full`` are for the global ``p = J*L`` layout; the
    subject occupies the leading ``J_i * L`` block in flat order.
    """
    idx = subject.observed_flat_indices()
    if idx.size == 0:
        raise DataValidationError(f"subject {subject.subject_id!r} has no observed cells")
    return mean_full[idx], sigma_full[np.ix_(idx, idx)]


def is_positive_definite(mat, tol=DEFAULT_PD_TOL):
    """Whether a symmetric matrix is positive definite at tolerance ``tol``.

    Uses a Cholesky pivot threshold (fast path); the eigenvalue-based
    oracle lives in the test suite.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DataValidationError("matrix must be square")
    scale = max(1.0, float(np.max(np.abs(mat))))
    if np.max(np.abs(mat - mat.T)) > 1e-8 * scale:
        raise DataValidationError("matrix must be symmetric")
    return bool(kernels.is_pd(np.ascontiguousarray(mat), tol))
