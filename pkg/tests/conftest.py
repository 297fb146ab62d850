import numpy as np
import pytest

from structcorr import (
    CorrelationParams,
    MomentParams,
    StructureSpec,
    TruthSpec,
)

# Posterior-median parameter sets used as synthetic truths (one per
# disease stage of the motivating application).
STAGE_PARAMS = {
    "early": dict(
        mu=[0.026, 0.066, 0.036, 0.015],
        sd=[0.037, 0.073, 0.064, 0.041],
        eta=[0.596, 0.225, 0.423, 0.275, 0.414, 0.464],
        rho=[0.239, 0.251, 0.415, 0.286],
        gamma=0.264,
    ),
    "late": dict(
        mu=[0.062, 0.074, 0.048, 0.050],
        sd=[0.064, 0.092, 0.070, 0.065],
        eta=[0.303, 0.201, 0.379, 0.202, 0.372, 0.523],
        rho=[0.080, -0.012, 0.111, 0.297],
        gamma=0.123,
    ),
    "non": dict(
        mu=[0.047, 0.032, 0.075, 0.050],
        sd=[0.067, 0.097, 0.074, 0.088],
        eta=[0.395, 0.182, 0.466, 0.039, 0.119, 0.405],
        rho=[0.007, -0.054, 0.047, 0.247],
        gamma=0.019,
    ),
}


def stage_moments(stage):
    p = STAGE_PARAMS[stage]
    return MomentParams(p["mu"], p["sd"])


def stage_correlations(stage):
    p = STAGE_PARAMS[stage]
    return CorrelationParams(p["eta"], p["rho"], p["gamma"])


def stage_truth(stage, distribution="normal", n_subjects=100, n_times=4):
    return TruthSpec(
        stage_moments(stage),
        stage_correlations(stage),
        distribution,
        n_subjects,
        n_times,
    )


@pytest.fixture
def early_truth():
    return stage_truth("early")


def min_eigenvalue(mat):
    return float(np.linalg.eigvalsh(mat)[0])


def eig_is_pd(mat, tol=1e-10):
    """Eigenvalue-based positive definiteness oracle."""
    return min_eigenvalue(mat) > tol


def random_pd_structured_params(spec, rng, sweeps=3):
    """Random correlation parameters whose full structured matrix is PD.

    Random walk from the identity: per sweep, propose each parameter
    uniformly inside its current intersected support and keep the
    proposal only if the full matrix stays PD (eigenvalue check).
    """
    from structcorr import assemble_correlation
    from structcorr.pdbounds import pd_support

    params = CorrelationParams.zeros(spec.n_outcomes)
    names = spec.param_names
    for _ in range(sweeps):
        for name in names:
            support = pd_support(spec, params, name)
            lo = 0.85 * support.lo
            hi = 0.85 * support.hi
            cand = rng.uniform(lo, hi)
            vec = params.as_vector(spec)
            vec[names.index(name)] = cand
            trial = CorrelationParams.from_vector(spec, vec)
            if eig_is_pd(assemble_correlation(spec, trial), 1e-8):
                params = trial
    return params
