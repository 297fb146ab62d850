import itertools

import numpy as np
import pytest

from structcorr import (
    CrossSectionMoments,
    DataValidationError,
    NotPositiveDefiniteError,
    barycentric_coordinates,
    optimal_weights,
    posterior_weights,
    srm,
)
from structcorr.weights import optimal_weights_batch, _cross_section_draws
from conftest import STAGE_PARAMS, stage_correlations, stage_moments


def stage_cross_section(stage):
    return CrossSectionMoments.from_params(
        stage_moments(stage), stage_correlations(stage)
    )


_GRID_CACHE = {}


def simplex_grid(n, resolution):
    """(m, n) array of all weight vectors with entries multiple of 1/resolution."""
    key = (n, resolution)
    if key not in _GRID_CACHE:
        cuts = np.array(
            list(itertools.combinations(range(resolution + n - 1), n - 1)), dtype=np.int64
        )
        bounds = np.hstack(
            [
                np.full((cuts.shape[0], 1), -1),
                cuts,
                np.full((cuts.shape[0], 1), resolution + n - 1),
            ]
        )
        _GRID_CACHE[key] = (np.diff(bounds, axis=1) - 1) / resolution
    return _GRID_CACHE[key]


def grid_max_srm(moments, resolution=100):
    grid = simplex_grid(moments.n_outcomes, resolution)
    num = grid @ moments.means
    den = np.sqrt(np.einsum("ij,jk,ik->i", grid, moments.covariance, grid))
    return float(np.max(num / den))


def test_srm_symmetric_case():
    m = CrossSectionMoments([1.0, 1.0], np.eye(2))
    assert srm([0.5, 0.5], m) == pytest.approx(np.sqrt(2.0), abs=1e-12)


def test_srm_validates_simplex():
    m = CrossSectionMoments([1.0, 1.0], np.eye(2))
    with pytest.raises(DataValidationError):
        srm([0.7, 0.7], m)
    with pytest.raises(DataValidationError):
        srm([-0.2, 1.2], m)


def test_srm_sign_follows_mean():
    m = CrossSectionMoments([-1.0, -0.5], np.eye(2))
    assert srm([0.5, 0.5], m) < 0


def test_optimal_weights_identity_case():
    w, val = optimal_weights(CrossSectionMoments([1.0, 1.0], np.eye(2)))
    assert np.allclose(w, [0.5, 0.5], atol=1e-12)
    assert val == pytest.approx(np.sqrt(2.0), abs=1e-12)


def test_optimal_weights_rejects_non_pd():
    cov = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(NotPositiveDefiniteError):
        optimal_weights(CrossSectionMoments([1.0, 1.0], cov))


def test_optimal_weights_nonpositive_means_pick_best_single():
    m = stage_cross_section("early")
    neg = CrossSectionMoments(-m.means, m.covariance)
    w, val = optimal_weights(neg)
    ratios = neg.means / np.sqrt(np.diag(neg.covariance))
    assert np.argmax(w) == np.argmax(ratios)
    assert np.sum(w > 0) == 1
    assert val == pytest.approx(np.max(ratios), abs=1e-12)


@pytest.mark.parametrize("stage", ["early", "late", "non"])
def test_optimal_weights_dominate(stage):
    m = stage_cross_section(stage)
    w, val = optimal_weights(m)
    equal = np.full(4, 0.25)
    assert val + 1e-12 >= srm(equal, m)
    for l in range(4):
        single = np.zeros(4)
        single[l] = 1.0
        assert val + 1e-12 >= srm(single, m)


def test_scale_invariance():
    m = stage_cross_section("late")
    w, val = optimal_weights(m)
    for c in (1e-3, 0.5, 40.0):
        scaled = CrossSectionMoments(c * m.means, c * c * m.covariance)
        w2, val2 = optimal_weights(scaled)
        assert np.max(np.abs(w2 - w)) < 1e-10
        assert val2 == pytest.approx(val, rel=1e-10)


def test_permutation_equivariance():
    m = stage_cross_section("early")
    w, val = optimal_weights(m)
    perm = [2, 0, 3, 1]
    mp = CrossSectionMoments(m.means[perm], m.covariance[np.ix_(perm, perm)])
    wp, valp = optimal_weights(mp)
    assert valp == pytest.approx(val, rel=1e-12)
    assert np.allclose(wp, w[perm], atol=1e-10)


def test_grid_oracle_agreement_random_inputs():
    """Enumeration beats a resolution-0.01 simplex grid up to 1e-4."""
    rng = np.random.default_rng(31)
    checked = 0
    while checked < 100:
        mu = rng.normal(0.05, 0.03, size=4)
        sd = rng.uniform(0.02, 0.12, size=4)
        eta = rng.uniform(-0.4, 0.7, size=6)
        rmat = np.eye(4)
        for k, (a, b) in enumerate(itertools.combinations(range(4), 2)):
            rmat[a, b] = rmat[b, a] = eta[k]
        if np.linalg.eigvalsh(rmat)[0] <= 1e-6:
            continue
        cov = rmat * np.outer(sd, sd)
        m = CrossSectionMoments(mu, cov)
        _, val = optimal_weights(m)
        assert val >= grid_max_srm(m, 100) - 1e-4
        checked += 1


def test_batch_matches_scalar():
    rng = np.random.default_rng(37)
    mus, sds, etas = [], [], []
    while len(mus) < 60:
        mu = rng.normal(0.05, 0.04, size=4)
        sd = rng.uniform(0.02, 0.12, size=4)
        eta = rng.uniform(-0.4, 0.7, size=6)
        rmat = np.eye(4)
        for k, (a, b) in enumerate(itertools.combinations(range(4), 2)):
            rmat[a, b] = rmat[b, a] = eta[k]
        if np.linalg.eigvalsh(rmat)[0] <= 1e-6:
            continue
        mus.append(mu)
        sds.append(sd)
        etas.append(eta)
    mus, sds, etas = map(np.asarray, (mus, sds, etas))
    covs = _cross_section_draws(mus, sds, etas)
    bw, bv = optimal_weights_batch(mus, covs)
    for i in range(len(mus)):
        w, val = optimal_weights(CrossSectionMoments(mus[i], covs[i]), polish=False)
        assert np.allclose(bw[i], w, atol=1e-12)
        assert bv[i] == pytest.approx(val, rel=1e-12)


def test_posterior_weights_constant_draws_collapse():
    p = STAGE_PARAMS["early"]
    mu = np.tile(p["mu"], (50, 1))
    sd = np.tile(p["sd"], (50, 1))
    eta = np.tile(p["eta"], (50, 1))
    summary = posterior_weights(mu, sd, eta)
    assert np.allclose(summary.weight_lower, summary.point_weights, atol=1e-10)
    assert np.allclose(summary.weight_upper, summary.point_weights, atol=1e-10)
    assert summary.srm_opt_interval[0] == pytest.approx(summary.point_srm_opt)
    assert summary.srm_opt_interval[1] == pytest.approx(summary.point_srm_opt)


def test_posterior_weights_requires_draws():
    with pytest.raises(DataValidationError):
        posterior_weights(np.empty((0, 4)), np.empty((0, 4)), np.empty((0, 6)))


def test_barycentric_vertices_and_centroid():
    coords = barycentric_coordinates(np.eye(4))
    assert np.allclose(coords[0], [0.0, 0.0, 0.0])
    assert np.allclose(coords[1], [1.0, 0.0, 0.0])
    assert np.allclose(coords[2], [0.5, np.sqrt(3) / 2, 0.0])
    centroid = barycentric_coordinates(np.full((1, 4), 0.25))[0]
    assert np.allclose(centroid, [0.5, 0.28868, 0.20412], atol=5e-6)
    with pytest.raises(DataValidationError):
        barycentric_coordinates(np.full((1, 3), 1 / 3))
