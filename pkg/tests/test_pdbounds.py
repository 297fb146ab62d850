import itertools

import numpy as np
import pytest

from structcorr import (
    CorrelationParams,
    DataValidationError,
    NotPositiveDefiniteError,
    StructureSpec,
    assemble_correlation,
    barnard_interval,
    enumerate_eta_plans,
    enumerate_gamma_plans,
    enumerate_rho_plan,
    greedy_submatrix,
    pd_support,
    plans_for_param,
)
from conftest import (
    eig_is_pd,
    random_pd_structured_params,
    stage_correlations,
)


def bisection_endpoints(corr, i, j, x_inside, tol=1e-10, iters=60):
    """Eigenvalue-bisection oracle for the PD interval of cell (i, j)."""

    def pd_at(x):
        trial = corr.copy()
        trial[i, j] = trial[j, i] = x
        return np.linalg.eigvalsh(trial)[0] > tol

    assert pd_at(x_inside)
    lo_a, lo_b = -1.0, x_inside
    if pd_at(-1.0):
        lo = -1.0
    else:
        for _ in range(iters):
            mid = 0.5 * (lo_a + lo_b)
            if pd_at(mid):
                lo_b = mid
            else:
                lo_a = mid
        lo = 0.5 * (lo_a + lo_b)
    hi_a, hi_b = x_inside, 1.0
    if pd_at(1.0):
        hi = 1.0
    else:
        for _ in range(iters):
            mid = 0.5 * (hi_a + hi_b)
            if pd_at(mid):
                hi_a = mid
            else:
                hi_b = mid
        hi = 0.5 * (hi_a + hi_b)
    return lo, hi


def test_barnard_decoupled_3x3():
    corr = np.eye(3)
    iv = barnard_interval(corr, 0, 1)
    assert iv.lo == pytest.approx(-1.0, abs=1e-12)
    assert iv.hi == pytest.approx(1.0, abs=1e-12)


def test_barnard_3x3_closed_form():
    # other off-diagonals both 0.5: interval is ab +- sqrt((1-a^2)(1-b^2))
    corr = np.array([[1.0, 0.0, 0.5], [0.0, 1.0, 0.5], [0.5, 0.5, 1.0]])
    iv = barnard_interval(corr, 0, 1)
    assert iv.lo == pytest.approx(-0.5, abs=1e-12)
    assert iv.hi == pytest.approx(1.0, abs=1e-12)


def test_barnard_endpoints_singular_midpoint_pd():
    rng = np.random.default_rng(11)
    spec = StructureSpec(4, 4)
    params = random_pd_structured_params(spec, rng)
    corr = assemble_correlation(spec, params)
    iv = barnard_interval(corr, 0, 5)  # a gamma cell
    for endpoint in (iv.lo, iv.hi):
        trial = corr.copy()
        trial[0, 5] = trial[5, 0] = endpoint
        assert abs(np.linalg.det(trial)) < 1e-9
    mid = 0.5 * (iv.lo + iv.hi)
    trial = corr.copy()
    trial[0, 5] = trial[5, 0] = mid
    assert eig_is_pd(trial, 1e-12)


def test_barnard_rejects_non_pd_ambient():
    corr = np.array(
        [
            [1.0, 0.0, 0.9],
            [0.0, 1.0, 0.9],
            [0.9, 0.9, 1.0],
        ]
    )
    # ambient (with the target zeroed the rest is already non-PD for any x
    # once the two 0.9 entries force it): make truly impossible
    bad = np.array(
        [
            [1.0, 0.0, 0.99, 0.0],
            [0.0, 1.0, 0.99, 0.99],
            [0.99, 0.99, 1.0, 0.0],
            [0.0, 0.99, 0.0, 1.0],
        ]
    )
    with pytest.raises(NotPositiveDefiniteError):
        barnard_interval(bad, 0, 1)
    # sanity: the first matrix still yields an interval
    assert barnard_interval(corr, 0, 1).hi <= 1.0


def test_barnard_validates_target():
    with pytest.raises(DataValidationError):
        barnard_interval(np.eye(3), 1, 1)


@pytest.mark.parametrize("n_out,n_times", [(2, 2), (3, 2), (2, 3), (4, 4), (3, 4)])
def test_barnard_matches_bisection_oracle(n_out, n_times):
    rng = np.random.default_rng(n_out * 10 + n_times)
    spec = StructureSpec(n_out, n_times)
    params = random_pd_structured_params(spec, rng)
    corr = assemble_correlation(spec, params)
    vec = params.as_vector(spec)
    for name in spec.param_names:
        for plan in plans_for_param(spec, name):
            sub = plan.realize(corr)
            i, j = plan.target_pos
            iv = barnard_interval(sub, i, j)
            cur = vec[spec.param_names.index(name)]
            lo, hi = bisection_endpoints(sub, i, j, cur)
            assert iv.lo == pytest.approx(lo, abs=1e-8)
            assert iv.hi == pytest.approx(hi, abs=1e-8)


def test_eta_plan_dimensions_and_variations():
    spec = StructureSpec(4, 4)
    plans = enumerate_eta_plans(spec, (1, 2), time=1)
    assert len(plans) == 4
    assert all(p.dim == 4 + 3 * 3 for p in plans)  # L + (L-1)(J-1) = 13
    sets = {frozenset(p.outcomes) for p in plans}
    assert len(sets) == 4
    for plan in plans:
        assert plan.target_count(spec) == 1

    assert enumerate_eta_plans(StructureSpec(2, 1), (1, 2))[0].dim == 2
    assert len(enumerate_eta_plans(StructureSpec(2, 1), (1, 2))) == 1

    plans32 = enumerate_eta_plans(StructureSpec(3, 2), (1, 2))
    assert len(plans32) == 2
    assert all(p.dim == 5 for p in plans32)


def test_rho_plan_dimensions():
    spec = StructureSpec(4, 4)
    plan = enumerate_rho_plan(spec, 1, (1, 2))
    assert plan.dim == 2 * 4 + 3 * 2  # 2L + (L-1)(J-2) = 14
    assert plan.target_count(spec) == 1

    assert enumerate_rho_plan(StructureSpec(4, 2), 1).dim == 8
    assert enumerate_rho_plan(StructureSpec(2, 3), 2).dim == 5
    with pytest.raises(DataValidationError):
        enumerate_rho_plan(StructureSpec(4, 1), 1)


def test_gamma_plans():
    from structcorr import index_param

    assert len(enumerate_gamma_plans(StructureSpec(4, 4))) == 12
    assert len(enumerate_gamma_plans(StructureSpec(2, 2))) == 2
    assert len(enumerate_gamma_plans(StructureSpec(3, 3))) == 6
    spec = StructureSpec(4, 3)
    for plan in enumerate_gamma_plans(spec):
        assert plan.dim == 3
        assert plan.target_count(spec) == 1
        # the three unique elements are gamma, one eta, one rho
        names = {
            index_param(spec, plan.outcomes[a] + 1, plan.outcomes[b] + 1)
            for a, b in itertools.combinations(range(3), 2)
        }
        kinds = sorted(n.split(".")[0] for n in names)
        assert kinds == ["eta", "gamma", "rho"]
    with pytest.raises(DataValidationError):
        enumerate_gamma_plans(StructureSpec(4, 1))


def test_greedy_matches_closed_forms():
    spec = StructureSpec(4, 4)
    rng = np.random.default_rng(5)
    for name, expected in (("eta.1.2", 13), ("rho.1", 14), ("gamma", 3)):
        for _ in range(5):
            order = rng.permutation(spec.dim).tolist()
            plan = greedy_submatrix(spec, name, order)
            assert plan.dim == expected
            assert plan.target_count(spec) == 1
            # maximality w.r.t. the order: no remaining outcome can be added
            for extra in range(spec.dim):
                if extra in plan.outcomes:
                    continue
                bigger = plan.outcomes + (extra,)
                count = sum(
                    1
                    for a, b in itertools.combinations(bigger, 2)
                    if _param(spec, a, b) == name
                )
                assert count != 1


def _param(spec, a, b):
    from structcorr import index_param

    return index_param(spec, a + 1, b + 1)


@pytest.mark.parametrize("n_out,n_times", [(2, 2), (3, 2), (2, 3), (3, 3), (4, 3), (3, 4), (4, 4)])
def test_exhaustive_search_no_larger_submatrix(n_out, n_times):
    """Bitmask-exhaustive: no uniqueness-preserving subset beats the closed forms."""
    spec = StructureSpec(n_out, n_times)
    p = spec.dim
    n_eta = n_out * (n_out - 1) // 2
    targets = {
        "eta.1.2": n_out + (n_out - 1) * (n_times - 1),
        f"rho.{n_out}": 2 * n_out + (n_out - 1) * (n_times - 2) if n_times >= 2 else None,
        "gamma": 3 if n_times >= 2 else None,
    }
    subsets = np.arange(1 << p, dtype=np.uint32)
    sizes = np.zeros(subsets.size, dtype=np.int8)
    for bit in range(p):
        sizes += ((subsets >> bit) & 1).astype(np.int8)
    for name, expected in targets.items():
        if expected is None:
            continue
        pairs = [
            (a, b)
            for a in range(p)
            for b in range(a + 1, p)
            if _param(spec, a, b) == name
        ]
        count = np.zeros(subsets.size, dtype=np.int16)
        for a, b in pairs:
            count += (((subsets >> a) & 1) & ((subsets >> b) & 1)).astype(np.int16)
        best = int(sizes[count == 1].max())
        assert best == expected


def test_pd_support_zero_state_is_full_interval():
    spec = StructureSpec(3, 3)
    params = CorrelationParams.zeros(3)
    for name in spec.param_names:
        iv = pd_support(spec, params, name)
        assert iv.lo == pytest.approx(-1.0, abs=1e-12)
        assert iv.hi == pytest.approx(1.0, abs=1e-12)


def test_pd_support_gamma_two_plan_example():
    # eta12 = rho1 = 0.5 with everything else 0 (L = J = 2): the rho.1
    # triple gives (-1/2, 1) and the rho.2 triple gives +-sqrt(3)/2
    spec = StructureSpec(2, 2)
    params = CorrelationParams([0.5], [0.5, 0.0], 0.0)
    iv = pd_support(spec, params, "gamma")
    assert iv.lo == pytest.approx(-0.5, abs=1e-12)
    assert iv.hi == pytest.approx(np.sqrt(3.0) / 2.0, abs=1e-12)


def test_pd_support_contains_current_value():
    rng = np.random.default_rng(17)
    for n_out, n_times in [(2, 3), (3, 2), (4, 4)]:
        spec = StructureSpec(n_out, n_times)
        params = random_pd_structured_params(spec, rng)
        vec = params.as_vector(spec)
        for k, name in enumerate(spec.param_names):
            iv = pd_support(spec, params, name)
            assert iv.lo < vec[k] < iv.hi


def test_pd_support_early_stage_gamma():
    spec = StructureSpec(4, 4)
    iv = pd_support(spec, stage_correlations("early"), "gamma")
    assert iv.contains(0.264)


def test_plan_soundness_random_interior_points():
    """Values inside one plan's interval keep that submatrix PD."""
    rng = np.random.default_rng(23)
    spec = StructureSpec(4, 3)
    params = random_pd_structured_params(spec, rng)
    corr = assemble_correlation(spec, params)
    for name in ("eta.1.3", "rho.2", "gamma"):
        for plan in plans_for_param(spec, name):
            sub = plan.realize(corr)
            i, j = plan.target_pos
            iv = barnard_interval(sub, i, j)
            for x in rng.uniform(iv.lo + 1e-9, iv.hi - 1e-9, size=20):
                trial = sub.copy()
                trial[i, j] = trial[j, i] = x
                assert eig_is_pd(trial, 1e-12)


def test_support_improves_pd_rate_over_full_interval():
    """Unif(L,U) produces PD full matrices at least as often as Unif(-1,1)."""
    rng = np.random.default_rng(29)
    spec = StructureSpec(4, 3)
    params = random_pd_structured_params(spec, rng)
    corr = assemble_correlation(spec, params)
    names = spec.param_names
    vec = params.as_vector(spec)
    hits_support, hits_full = 0, 0
    trials = 0
    cells = {}
    from structcorr.structure import param_index_map

    cmap = param_index_map(4, 3)
    for k, name in enumerate(names):
        cells[name] = np.nonzero(cmap == k)
    for name in names:
        iv = pd_support(spec, params, name)
        rows, cols = cells[name]
        for _ in range(100):
            trials += 1
            for lo, hi, bucket in ((iv.lo, iv.hi, "s"), (-1.0, 1.0, "f")):
                x = rng.uniform(lo, hi)
                trial = corr.copy()
                trial[rows, cols] = x
                ok = eig_is_pd(trial, 1e-12)
                if bucket == "s":
                    hits_support += ok
                else:
                    hits_full += ok
    # candidates inside the intersected support are not guaranteed to keep
    # the full matrix PD (gamma especially), but the rate must dominate
    # the unrestricted one clearly
    assert trials >= 1000
    assert hits_support > hits_full + 3 * np.sqrt(trials * 0.25)
