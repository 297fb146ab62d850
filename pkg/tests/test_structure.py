import numpy as np
import pytest

from structcorr import (
    UNIT,
    CorrelationParams,
    DataValidationError,
    MomentParams,
    StructureSpec,
    Subject,
    assemble_correlation,
    assemble_covariance,
    index_param,
    is_positive_definite,
    observed_projection,
)
from conftest import stage_correlations, stage_moments


def test_spec_dimensions():
    spec = StructureSpec(4, 4)
    assert spec.dim == 16
    assert spec.n_params == 11
    assert len(spec.param_names) == 11
    assert spec.param_names[0] == "eta.1.2"
    assert spec.param_names[-1] == "gamma"


def test_spec_single_time_has_no_rho_gamma():
    spec = StructureSpec(3, 1)
    assert spec.n_params == 3
    assert all(n.startswith("eta.") for n in spec.param_names)


def test_spec_validation():
    with pytest.raises(DataValidationError):
        StructureSpec(1, 4)
    with pytest.raises(DataValidationError):
        StructureSpec(4, 0)


def test_index_param_examples():
    spec = StructureSpec(4, 4)
    # same time, different outcomes
    assert index_param(spec, 1, 2) == "eta.1.2"
    # same outcome, different times
    assert index_param(spec, 1, 5) == "rho.1"
    # diagonal
    assert index_param(spec, 3, 3) == UNIT
    # both differ
    assert index_param(spec, 1, 6) == "gamma"
    # symmetry
    assert index_param(spec, 6, 1) == index_param(spec, 1, 6)


def test_index_param_range_check():
    spec = StructureSpec(2, 2)
    with pytest.raises(DataValidationError):
        index_param(spec, 0, 1)
    with pytest.raises(DataValidationError):
        index_param(spec, 1, 5)


def test_assemble_zero_params_gives_identity():
    spec = StructureSpec(4, 3)
    corr = assemble_correlation(spec, CorrelationParams.zeros(4))
    assert np.array_equal(corr, np.eye(12))


@pytest.mark.parametrize("n_out", [2, 3, 4, 5])
@pytest.mark.parametrize("n_times", [1, 2, 3, 4, 5, 6])
def test_cell_count_identities(n_out, n_times):
    """Counts of eta/rho/gamma cells match the closed forms exactly."""
    spec = StructureSpec(n_out, n_times)
    params = CorrelationParams(
        np.linspace(0.1, 0.2, n_out * (n_out - 1) // 2),
        np.linspace(-0.1, 0.1, n_out),
        0.05,
    )
    corr = assemble_correlation(spec, params)
    p = spec.dim
    counts = {"eta": 0, "rho": 0, "gamma": 0}
    for m in range(1, p + 1):
        for n in range(1, p + 1):
            if m == n:
                continue
            counts[index_param(spec, m, n).split(".")[0]] += 1
    assert counts["eta"] == n_times * n_out * (n_out - 1)
    assert counts["rho"] == n_times * n_out * (n_times - 1)
    assert counts["gamma"] == n_times * n_out * (n_times - 1) * (n_out - 1)
    assert sum(counts.values()) + p == p * p
    # matrix cells agree with the naming
    vec = params.as_vector(spec)
    names = spec.param_names
    for m in range(1, p + 1):
        for n in range(1, p + 1):
            expected = 1.0 if m == n else vec[names.index(index_param(spec, m, n))]
            assert corr[m - 1, n - 1] == expected


def test_time_exchangeability_of_cross_blocks():
    spec = StructureSpec(3, 4)
    rng = np.random.default_rng(0)
    params = CorrelationParams(rng.uniform(-0.2, 0.2, 3), rng.uniform(-0.2, 0.2, 3), 0.1)
    corr = assemble_correlation(spec, params)
    L = 3
    block_12 = corr[0:L, L : 2 * L]
    block_34 = corr[2 * L : 3 * L, 3 * L : 4 * L]
    block_14 = corr[0:L, 3 * L : 4 * L]
    assert np.array_equal(block_12, block_34)
    assert np.array_equal(block_12, block_14)


def test_assemble_covariance():
    moments = MomentParams([0.0, 0.0], [2.0, 3.0])
    corr = np.array([[1.0, 0.5], [0.5, 1.0]])
    cov = assemble_covariance(moments, corr)
    assert cov[0, 1] == pytest.approx(3.0)
    assert np.allclose(np.diag(cov), [4.0, 9.0])

    # identity correlation with unit sds is the identity
    eye = assemble_covariance(MomentParams([0, 0], [1, 1]), np.eye(2))
    assert np.array_equal(eye, np.eye(2))


def test_assemble_covariance_early_value():
    # sigma(outcome 1, outcome 2) = eta12 * s1 * s2 from the early-stage medians
    moments = stage_moments("early")
    corr = assemble_correlation(StructureSpec(4, 1), stage_correlations("early"))
    cov = assemble_covariance(moments, corr)
    assert cov[0, 1] == pytest.approx(0.596 * 0.037 * 0.073, abs=1e-12)
    assert cov[0, 1] == pytest.approx(0.00161, abs=2e-6)


def test_assemble_covariance_rejects_bad_sd():
    with pytest.raises(DataValidationError):
        MomentParams([0.0], [0.0])


def test_determinant_of_diagonal_structure():
    spec = StructureSpec(3, 2)
    moments = MomentParams([0, 0, 0], [1.5, 2.0, 0.5])
    cov = assemble_covariance(moments, assemble_correlation(spec, CorrelationParams.zeros(3)))
    expected = np.prod(np.asarray(moments.sds) ** (2 * spec.n_times))
    assert np.linalg.det(cov) == pytest.approx(expected, rel=1e-10)


def test_observed_projection():
    spec = StructureSpec(2, 2)
    params = CorrelationParams([0.3], [0.5, 0.2], 0.1)
    moments = MomentParams([1.0, 2.0], [1.0, 2.0])
    corr = assemble_correlation(spec, params)
    cov = assemble_covariance(moments, corr)
    mean = np.array([1.0, 2.0, 1.0, 2.0])

    full = Subject("a", np.zeros((2, 2)), np.ones((2, 2), bool))
    mu_o, cov_o = observed_projection(full, mean, cov)
    assert np.array_equal(mu_o, mean)
    assert np.array_equal(cov_o, cov)

    single = Subject("b", np.zeros((1, 2)), np.array([[True, False]]))
    mu_o, cov_o = observed_projection(single, mean, cov)
    assert np.array_equal(mu_o, [1.0])
    assert cov_o == pytest.approx(np.array([[1.0]]))

    # observing outcome 1 at both times picks up rho.1 * s1^2 off-diagonal
    two = Subject("c", np.zeros((2, 2)), np.array([[True, False], [True, False]]))
    mu_o, cov_o = observed_projection(two, mean, cov)
    assert cov_o[0, 1] == pytest.approx(0.5 * 1.0 * 1.0)


def test_observed_projection_preserves_pd(early_truth):
    rng = np.random.default_rng(3)
    spec = early_truth.spec
    cov = early_truth.covariance()
    mean = np.tile(early_truth.moments.means, 4)
    for _ in range(10):
        mask = rng.uniform(size=(4, 4)) < 0.6
        if not mask.any():
            mask[0, 0] = True
        subj = Subject("x", np.zeros((4, 4)), mask)
        _, cov_o = observed_projection(subj, mean, cov)
        assert np.linalg.eigvalsh(cov_o)[0] > 0


def test_is_positive_definite():
    assert is_positive_definite(np.eye(3))
    assert not is_positive_definite(np.array([[1.0, 1.0], [1.0, 1.0]]))
    # eigenvalues {1.5, 1.5, 0}: singular at tolerance
    border = np.full((3, 3), -0.5) + 1.5 * np.eye(3)
    assert not is_positive_definite(border, tol=1e-10)
    with pytest.raises(DataValidationError):
        is_positive_definite(np.array([[1.0, 0.2], [0.1, 1.0]]))
