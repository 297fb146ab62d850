"""Positive-definite intervals for one structured-correlation parameter.

For a unique parameter ``r_k`` of the structured matrix, the support of
its proposal is found by (1) enumerating the largest principal
submatrices in which ``r_k`` appears exactly once, (2) computing, per
submatrix, the open interval of values keeping that submatrix positive
definite via the determinant quadratic
``det(sub(x)) = a x^2 + b x + c`` with

    a = (|R_1| + |R_-1| - 2 |R_0|) / 2
    b = (|R_1| - |R_-1|) / 2
    c = |R_0|

(``R_v`` substitutes ``v`` at the target cell), and (3) intersecting the
per-submatrix intervals.  A value inside the intersection keeps every
enumerated submatrix positive definite, which is necessary but not
sufficient for the full matrix; the sampler's prior indicator handles
the remainder.

Flat outcome indices here are 0-based and time-major (outcome ``l`` at
time ``j`` is ``j*L + l``); the specialized enumerators take 1-based
outcome/time labels matching the parameter names (``eta.1.2`` etc.).
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import DataValidationError, NotPositiveDefiniteError, NumericalError
from .structure import StructureSpec, assemble_correlation, index_param


@dataclass(frozen=True)
class PdInterval:
    """Open interval (lo, hi) within which a correlation cell keeps a
    matrix positive definite."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise NumericalError(f"degenerate interval ({self.lo}, {self.hi})")

    def contains(self, x):
        return self.lo < x < self.hi

    def intersect(self, other):
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo >= hi:
            raise NumericalError("empty intersection of positive-definite intervals")
        return PdInterval(lo, hi)


@dataclass(frozen=True)
class SubmatrixPlan:
    """A principal submatrix in which one target parameter appears once.

    ``outcomes`` are 0-based flat outcome indices ordered so the realized
    submatrix is the reordered leading block; ``target_pos`` is the (row,
    col) of the target parameter inside the submatrix.
    """

    param: str
    outcomes: tuple
    target_pos: tuple

    @property
    def dim(self):
        return len(self.outcomes)

    def realize(self, corr_full):
        """Extract the planned principal submatrix from a full matrix."""
        idx = np.asarray(self.outcomes, dtype=np.intp)
        return np.ascontiguousarray(corr_full[np.ix_(idx, idx)])

    def target_count(self, spec):
        """How many cells of the planned submatrix carry the target."""
        hits = 0
        for a in range(self.dim):
            for b in range(a + 1, self.dim):
                name = index_param(spec, self.outcomes[a] + 1, self.outcomes[b] + 1)
                hits += name == self.param
        return hits


def _interval_from_coeffs(a, b, c):
    """Root interval of a downward-opening determinant quadratic."""
    disc = b * b - 4.0 * a * c
    if a >= 0.0 or disc <= 0.0:
        raise NotPositiveDefiniteError(
            "no positive-definite interval: ambient matrix is not positive definite"
        )
    # stable quadratic roots: avoid cancellation between -b and sqrt(disc)
    s = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    r1 = s / a
    r2 = c / s if s != 0.0 else -r1
    lo, hi = (r1, r2) if r1 < r2 else (r2, r1)
    # roots can overshoot [-1, 1] only by rounding noise
    return PdInterval(max(lo, -1.0), min(hi, 1.0))


def barnard_interval(corr, i, j):
    """Positive-definite interval for cell (i, j) of a correlation matrix.

    ``corr`` must be symmetric with unit diagonal and, apart from the
    target cell, positive-definite-compatible: the determinant quadratic
    must open downward with two real roots.  Indices are 0-based.
    """
    corr = np.ascontiguousarray(corr, dtype=float)
    n = corr.shape[0]
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise DataValidationError(f"target cell ({i}, {j}) must be off-diagonal")
    a, b, c = kernels.barnard_coeffs(corr, np.arange(n, dtype=np.intp), i, j)
    return _interval_from_coeffs(a, b, c)


def greedy_submatrix(spec, param, order):
    """Largest-possible submatrix for ``param`` built greedily along ``order``.

    ``order`` is a permutation of the 0-based flat outcome indices.  The
    first pair realizing the parameter seeds the plan; remaining outcomes
    are added whenever the target stays unique.  The result is maximal
    with respect to the given order and works for any cell-to-parameter
    structure, not just the specialized enumerators below.
    """
    order = list(order)
    p = spec.dim
    if sorted(order) != list(range(p)):
        raise DataValidationError("order must be a permutation of range(p)")

    def code(m, n):
        return index_param(spec, m + 1, n + 1)

    seed = None
    for a in range(p):
        for b in range(a + 1, p):
            if code(order[a], order[b]) == param:
                seed = (order[a], order[b])
                break
        if seed:
            break
    if seed is None:
        raise DataValidationError(f"no cell of the matrix carries {param!r}")

    chosen = list(seed)
    for u in order:
        if u in chosen:
            continue
        if any(code(u, v) == param for v in chosen):
            continue
        chosen.append(u)
    return SubmatrixPlan(param, tuple(chosen), (0, 1))


def enumerate_eta_plans(spec, pair, time=1):
    """All largest-possible submatrices for ``eta.a.b`` anchored at ``time``.

    There are J variations: the full outcome block at the anchor time,
    plus, at each other time, every outcome except one of the pair; the
    variations differ in how many times omit ``a`` versus ``b``.  Labels
    are 1-based.
    """
    a, b = pair
    if not (1 <= a < b <= spec.n_outcomes):
        raise DataValidationError(f"invalid outcome pair {pair}")
    if not (1 <= time <= spec.n_times):
        raise DataValidationError(f"invalid time {time}")
    n_out, name = spec.n_outcomes, f"eta.{a}.{b}"
    other_times = [t for t in range(1, spec.n_times + 1) if t != time]
    block = [(time - 1) * n_out + l for l in range(n_out)]
    plans = []
    for c in range(spec.n_times):
        idx = list(block)
        for pos, t in enumerate(other_times):
            omit = b if pos < c else a
            idx.extend((t - 1) * n_out + l for l in range(n_out) if l != omit - 1)
        plans.append(
            SubmatrixPlan(name, tuple(idx), (a - 1, b - 1))
        )
    return plans


def enumerate_rho_plan(spec, outcome, times=(1, 2)):
    """The single largest-possible submatrix for ``rho.outcome``.

    Both full blocks at the two anchor times, plus every outcome except
    ``outcome`` at the remaining times; no other variation exists.
    """
    if spec.n_times < 2:
        raise DataValidationError("rho parameters require at least two times")
    if not (1 <= outcome <= spec.n_outcomes):
        raise DataValidationError(f"invalid outcome {outcome}")
    t1, t2 = times
    if t1 == t2 or not (1 <= t1 <= spec.n_times and 1 <= t2 <= spec.n_times):
        raise DataValidationError(f"invalid time pair {times}")
    n_out = spec.n_outcomes
    idx = [(t1 - 1) * n_out + l for l in range(n_out)]
    idx += [(t2 - 1) * n_out + l for l in range(n_out)]
    for t in range(1, spec.n_times + 1):
        if t in (t1, t2):
            continue
        idx.extend((t - 1) * n_out + l for l in range(n_out) if l != outcome - 1)
    return SubmatrixPlan(
        f"rho.{outcome}", tuple(idx), (outcome - 1, n_out + outcome - 1)
    )


def enumerate_gamma_plans(spec):
    """All 2*C(L,2) largest-possible 3x3 submatrices for ``gamma``.

    Each plan carries exactly the unique elements {gamma, one eta, one
    rho}: for the pair (a, b), the rho.a variant and the rho.b variant.
    """
    if spec.n_times < 2:
        raise DataValidationError("gamma requires at least two times")
    n_out = spec.n_outcomes
    plans = []
    for a, b in spec.eta_pairs:
        seed = ((a - 1), n_out + (b - 1))  # (time 1, a) x (time 2, b)
        plans.append(SubmatrixPlan("gamma", (*seed, n_out + (a - 1)), (0, 1)))
        plans.append(SubmatrixPlan("gamma", (*seed, (b - 1)), (0, 1)))
    return plans


@lru_cache(maxsize=None)
def plans_for_param(spec, param):
    """Deduplicated canonical plan set whose intervals pd_support intersects."""
    if param.startswith("eta."):
        _, a, b = param.split(".")
        plans = enumerate_eta_plans(spec, (int(a), int(b)), time=1)
    elif param.startswith("rho."):
        plans = [enumerate_rho_plan(spec, int(param.split(".")[1]), (1, 2))]
    elif param == "gamma":
        plans = enumerate_gamma_plans(spec)
    else:
        raise DataValidationError(f"unknown parameter {param!r}")
    seen, unique = set(), []
    for plan in plans:
        key = frozenset(plan.outcomes)
        if key not in seen:
            seen.add(key)
            unique.append(plan)
    return tuple(unique)


def intersect_plan_intervals(corr_full, plans):
    """Intersection of the per-plan positive-definite intervals."""
    corr_full = np.ascontiguousarray(corr_full, dtype=float)
    support = None
    for plan in plans:
        idx = np.asarray(plan.outcomes, dtype=np.intp)
        a, b, c = kernels.barnard_coeffs(corr_full, idx, *plan.target_pos)
        iv = _interval_from_coeffs(a, b, c)
        support = iv if support is None else support.intersect(iv)
    return support


def pd_support(spec, params, param):
    """Proposal support for ``param``: intersection over all its plans.

    Requires the current full structured matrix to be positive definite;
    the returned open interval then contains the current value.
    """
    plans = plans_for_param(spec, param)
    corr = assemble_correlation(spec, params)
    return intersect_plan_intervals(corr, plans)
