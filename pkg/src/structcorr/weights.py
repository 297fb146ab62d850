"""SRM of weighted outcome constructs and simplex-optimal weights.

The standardized response mean of a convex combination ``w`` of the L
outcomes is ``w'mu / sqrt(w' Sigma w)`` where ``Sigma`` is the
cross-sectional (single-time) covariance built from the per-outcome sds
and the same-time correlations.  The maximizer over the simplex is found
exactly by support enumeration: the ratio is scale-free in ``w``, so on
each face the stationary direction solves ``Sigma_S d = mu_S`` and is a
candidate iff strictly positive.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DataValidationError, NotPositiveDefiniteError, NumericalError
from .structure import is_positive_definite

SIMPLEX_TOL = 1e-12

#: Regular unit-edge tetrahedron vertices used for barycentric export.
TETRAHEDRON = np.array(
    [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.5, np.sqrt(3.0) / 2.0, 0.0],
        [0.5, np.sqrt(3.0) / 6.0, np.sqrt(6.0) / 3.0],
    ]
)


@dataclass(frozen=True)
class CrossSectionMoments:
    """Single-time means and covariance of the L outcomes."""

    means: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (means.size, means.size):
            raise DataValidationError("covariance shape does not match means")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariance", cov)

    @classmethod
    def from_params(cls, moments, corr):
        """Build from per-outcome moments and the same-time correlations."""
        n = moments.means.size
        rmat = np.eye(n)
        for k, (a, b) in enumerate(itertools.combinations(range(n), 2)):
            rmat[a, b] = rmat[b, a] = corr.eta[k]
        cov = rmat * np.outer(moments.sds, moments.sds)
        return cls(moments.means.copy(), cov)

    @property
    def n_outcomes(self):
        return self.means.size


def _check_simplex(w, n):
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise DataValidationError(f"weight vector must have length {n}")
    if np.min(w) < -SIMPLEX_TOL or abs(w.sum() - 1.0) > 1e-9:
        raise DataValidationError("weights must be nonnegative and sum to 1")
    return np.clip(w, 0.0, None)


def srm(w, moments):
    """Standardized response mean of the construct ``w``."""
    w = _check_simplex(w, moments.n_outcomes)
    denom = float(w @ moments.covariance @ w)
    if denom <= 0.0:
        raise NotPositiveDefiniteError("construct variance is not positive")
    return float(w @ moments.means) / np.sqrt(denom)


def _enumeration_candidates(mu, cov):
    """(weights, srm) candidates from stationary faces and singletons."""
    n = mu.size
    cands = []
    for l in range(n):
        w = np.zeros(n)
        w[l] = 1.0
        cands.append((w, mu[l] / np.sqrt(cov[l, l])))
    for r in range(2, n + 1):
        for sub in itertools.combinations(range(n), r):
            idx = list(sub)
            try:
                d = np.linalg.solve(cov[np.ix_(idx, idx)], mu[idx])
            except np.linalg.LinAlgError:
                continue
            if np.all(d > 0.0):
                w = np.zeros(n)
                w[idx] = d / d.sum()
                val = float(w @ mu) / np.sqrt(float(w @ cov @ w))
                cands.append((w, val))
    return cands


def _pick_best(cands):
    # ties break toward smaller support, then lexicographically larger
    # leading weights (deterministic)
    def key(item):
        w, val = item
        support = int(np.sum(w > 0.0))
        return (-val, support, tuple(-w))

    return min(cands, key=key)


def _project_simplex(v):
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, v.size + 1) > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.clip(v - theta, 0.0, None)


def _polish(w, val, mu, cov, iterations=100, tol=1e-12):
    """Projected-gradient ascent to guard degenerate enumeration ties."""
    step = 1.0
    for _ in range(iterations):
        sig = np.sqrt(float(w @ cov @ w))
        grad = mu / sig - (float(w @ mu) / sig**3) * (cov @ w)
        improved = False
        while step > 1e-16:
            cand = _project_simplex(w + step * grad)
            s = cand.sum()
            if s <= 0.0:
                step *= 0.5
                continue
            cand /= s
            cval = float(cand @ mu) / np.sqrt(float(cand @ cov @ cand))
            if cval > val + tol:
                w, val = cand, cval
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return w, val


def optimal_weights(moments, polish=True):
    """Simplex weights maximizing the SRM, and the attained value.

    Exact via support enumeration (the paper-scale L=4 has 15 faces);
    singleton supports are always evaluated, which also covers the
    degenerate all-nonpositive-means case where the best construct is the
    single outcome with the largest mean-to-sd ratio.
    """
    mu, cov = moments.means, moments.covariance
    if moments.n_outcomes > 16:
        raise DataValidationError("support enumeration limited to L <= 16")
    diag = np.diagonal(cov)
    if np.min(diag) <= 0.0:
        raise NotPositiveDefiniteError("cross-sectional covariance must be PD")
    scale = np.sqrt(diag)
    if not is_positive_definite(cov / np.outer(scale, scale)):
        raise NotPositiveDefiniteError("cross-sectional covariance must be PD")
    w, val = _pick_best(_enumeration_candidates(mu, cov))
    if polish:
        w, val = _polish(w, val, mu, cov)
    return w, float(val)


def optimal_weights_batch(mus, covs):
    """Vectorized support enumeration over many (mu, cov) draws.

    Same candidate set and tie-breaking as :func:`optimal_weights`
    without the polish step; used for per-draw posterior summaries.
    Returns ``(weights (n, L), srm values (n,))``.
    """
    mus = np.asarray(mus, dtype=float)
    covs = np.asarray(covs, dtype=float)
    n, L = mus.shape
    best_val = np.full(n, -np.inf)
    best_support = np.full(n, L + 1)
    best_w = np.zeros((n, L))

    def consider(w_cand, vals):
        support = np.sum(w_cand > 0.0, axis=1)
        better = vals > best_val + 1e-15
        tie = np.abs(vals - best_val) <= 1e-15
        better |= tie & (support < best_support)
        best_w[better] = w_cand[better]
        best_val[better] = vals[better]
        best_support[better] = support[better]

    for l in range(L):
        w = np.zeros((n, L))
        w[:, l] = 1.0
        consider(w, mus[:, l] / np.sqrt(covs[:, l, l]))
    for r in range(2, L + 1):
        for sub in itertools.combinations(range(L), r):
            idx = list(sub)
            sub_cov = covs[:, idx][:, :, idx]
            try:
                d = np.linalg.solve(sub_cov, mus[:, idx, None])[..., 0]
            except np.linalg.LinAlgError:
                d = np.stack(
                    [
                        np.linalg.lstsq(sub_cov[i], mus[i, idx], rcond=None)[0]
                        for i in range(n)
                    ]
                )
            ok = np.all(d > 0.0, axis=1)
            if not ok.any():
                continue
            w = np.zeros((n, L))
            w[np.ix_(ok, idx)] = d[ok] / d[ok].sum(axis=1, keepdims=True)
            num = np.einsum("ij,ij->i", w[ok], mus[ok])
            den = np.sqrt(np.einsum("ij,ijk,ik->i", w[ok], covs[ok], w[ok]))
            vals = np.full(n, -np.inf)
            vals[ok] = num / den
            consider(w, vals)
    return best_w, best_val


@dataclass(frozen=True)
class WeightSummary:
    """Posterior summary of construct weights and SRMs."""

    point_weights: np.ndarray
    point_srm_opt: float
    point_srm_equal: float
    point_srm_single: np.ndarray
    weight_lower: np.ndarray
    weight_upper: np.ndarray
    srm_opt_interval: tuple
    srm_equal_interval: tuple
    srm_single_lower: np.ndarray
    srm_single_upper: np.ndarray
    draw_weights: np.ndarray
    draw_srm_opt: np.ndarray
    draw_srm_equal: np.ndarray


def _cross_section_draws(means_draws, sd_draws, eta_draws):
    n, L = means_draws.shape
    covs = np.empty((n, L, L))
    outer = sd_draws[:, :, None] * sd_draws[:, None, :]
    rmat = np.zeros((n, L, L))
    rmat[:, np.arange(L), np.arange(L)] = 1.0
    for k, (a, b) in enumerate(itertools.combinations(range(L), 2)):
        rmat[:, a, b] = rmat[:, b, a] = eta_draws[:, k]
    covs[:] = rmat * outer
    return covs


def posterior_weights(means_draws, sd_draws, eta_draws):
    """Summarize the weight posterior from pooled post-burn-in draws.

    The point estimate plugs the componentwise posterior medians into
    :func:`optimal_weights`; intervals are componentwise 2.5/97.5
    percentiles of the per-draw optimal weights and SRMs.
    """
    means_draws = np.atleast_2d(np.asarray(means_draws, dtype=float))
    sd_draws = np.atleast_2d(np.asarray(sd_draws, dtype=float))
    eta_draws = np.atleast_2d(np.asarray(eta_draws, dtype=float))
    if means_draws.shape[0] == 0:
        raise DataValidationError("no posterior draws to summarize")
    L = means_draws.shape[1]

    med_mu = np.median(means_draws, axis=0)
    med_sd = np.median(sd_draws, axis=0)
    med_eta = np.median(eta_draws, axis=0)
    med_cov = _cross_section_draws(med_mu[None], med_sd[None], med_eta[None])[0]
    med_moments = CrossSectionMoments(med_mu, med_cov)
    point_w, point_srm = optimal_weights(med_moments)
    equal = np.full(L, 1.0 / L)
    point_srm_equal = srm(equal, med_moments)
    point_srm_single = med_mu / med_sd

    covs = _cross_section_draws(means_draws, sd_draws, eta_draws)
    draw_w, draw_srm = optimal_weights_batch(means_draws, covs)
    eq_num = means_draws @ equal
    eq_den = np.sqrt(np.einsum("j,ijk,k->i", equal, covs, equal))
    draw_srm_equal = eq_num / eq_den
    draw_single = means_draws / sd_draws

    lo_w = np.clip(np.percentile(draw_w, 2.5, axis=0), 0.0, 1.0)
    hi_w = np.clip(np.percentile(draw_w, 97.5, axis=0), 0.0, 1.0)
    return WeightSummary(
        point_weights=point_w,
        point_srm_opt=point_srm,
        point_srm_equal=point_srm_equal,
        point_srm_single=point_srm_single,
        weight_lower=lo_w,
        weight_upper=hi_w,
        srm_opt_interval=(
            float(np.percentile(draw_srm, 2.5)),
            float(np.percentile(draw_srm, 97.5)),
        ),
        srm_equal_interval=(
            float(np.percentile(draw_srm_equal, 2.5)),
            float(np.percentile(draw_srm_equal, 97.5)),
        ),
        srm_single_lower=np.percentile(draw_single, 2.5, axis=0),
        srm_single_upper=np.percentile(draw_single, 97.5, axis=0),
        draw_weights=draw_w,
        draw_srm_opt=draw_srm,
        draw_srm_equal=draw_srm_equal,
    )


def barycentric_coordinates(weights):
    """Map length-4 simplex weights to points on a regular tetrahedron.

    Vertices (0,0,0), (1,0,0), (1/2, sqrt(3)/2, 0) and
    (1/2, sqrt(3)/6, sqrt(6)/3); equal weights map to the centroid.
    """
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    if weights.shape[1] != 4:
        raise DataValidationError("barycentric export requires exactly 4 outcomes")
    return weights @ TETRAHEDRON
