"""MCMC for the structured-correlation multivariate normal model.

Per iteration: a conjugate Gibbs draw of the per-outcome means, an
independence Metropolis-Hastings step per standard deviation with an
inverse-gamma candidate, and one Metropolis-Hastings step per unique
correlation with the candidate drawn on a positive-definite support
(intersected interval, single-submatrix interval, or the full (-1, 1),
uniform or mode-pinned reparameterized beta).  A non-positive-definite
full matrix has zero prior mass, so such candidates are always rejected;
the fraction of positive-definite candidates is tracked per parameter.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DataValidationError, NumericalError
from .pdbounds import PdInterval, intersect_plan_intervals, plans_for_param
from .structure import (
    DEFAULT_PD_TOL,
    CorrelationParams,
    ModelState,
    MomentParams,
    StructureSpec,
    assemble_correlation,
    param_index_map,
    tile_means,
)

CANDIDATE_KINDS = (
    "unif_lu",
    "rbeta_lu",
    "rbeta_full",
    "unif_l1u1",
    "rbeta_l1u1",
    "unif_full",
)

#: Proposal supports are shrunk by this amount at both ends so exact
#: singular boundary values are never proposed.
SUPPORT_EPS = 1e-9


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length, proposal family and tuning knobs."""

    iterations: int = 50_000
    burn_in: int = 1_000
    chains: int = 4
    seed: int = 0
    candidate_kind: str = "rbeta_lu"
    kappa: float = 50.0
    target_acceptance: float = 0.25
    variance_prior_nu: float = 2.1
    tune_window: int = 100
    tune_rate: float = 2.0
    kappa_min: float = 2.5
    kappa_max: float = 1e4
    validate_pd: bool = False

    def __post_init__(self):
        if not (self.iterations > self.burn_in >= 0):
            raise DataValidationError("need iterations > burn_in >= 0")
        if self.kappa <= 2.0:
            raise DataValidationError("kappa must exceed 2")
        if not (0.0 < self.target_acceptance < 1.0):
            raise DataValidationError("target_acceptance must be in (0, 1)")
        kind = self.candidate_kind.lower()
        if kind not in CANDIDATE_KINDS:
            raise DataValidationError(
                f"candidate_kind must be one of {CANDIDATE_KINDS}"
            )
        object.__setattr__(self, "candidate_kind", kind)


@dataclass(frozen=True)
class ChainOutput:
    """Post-burn-in draws plus per-parameter diagnostics for one chain."""

    param_names: tuple
    draws: np.ndarray
    acceptance: dict
    pd_rate: dict
    final_kappa: dict
    chain_index: int
    iterations: int
    burn_in: int
    seed: int

    @property
    def n_draws(self):
        return self.draws.shape[0]

    def column(self, name):
        return self.draws[:, self.param_names.index(name)]


@dataclass(frozen=True)
class RBetaShape:
    """Beta(alpha, beta) rescaled to (lo, hi); alpha + beta is the
    concentration and the mode sits at the conditioning value."""

    alpha: float
    beta: float
    lo: float
    hi: float


def rbeta_shape(kappa, mode, lo, hi):
    """Shape of the rescaled-beta candidate with its mode at ``mode``.

    ``alpha = 1 + (kappa - 2) (mode - lo) / (hi - lo)`` and
    ``beta = kappa - alpha``; a mode outside [lo, hi] (possible only by
    rounding of a freshly computed support) is clamped onto it.
    """
    if kappa <= 2.0:
        raise DataValidationError("kappa must exceed 2")
    if not lo < hi:
        raise NumericalError(f"empty proposal support ({lo}, {hi})")
    mode = min(max(mode, lo), hi)
    alpha = 1.0 + (kappa - 2.0) * (mode - lo) / (hi - lo)
    return RBetaShape(alpha, kappa - alpha, lo, hi)


def rbeta_logpdf(x, shape):
    """Log density of the rescaled beta at ``x`` (-inf outside support)."""
    width = shape.hi - shape.lo
    z = (x - shape.lo) / width
    if not 0.0 < z < 1.0:
        return -np.inf
    return (
        (shape.alpha - 1.0) * math.log(z)
        + (shape.beta - 1.0) * math.log1p(-z)
        - (
            math.lgamma(shape.alpha)
            + math.lgamma(shape.beta)
            - math.lgamma(shape.alpha + shape.beta)
        )
        - math.log(width)
    )


def rbeta_draw(rng, shape):
    return shape.lo + (shape.hi - shape.lo) * rng.beta(shape.alpha, shape.beta)


def tune_kappa(window_acceptance, kappa, target, rate=2.0, bounds=(2.5, 1e4)):
    """Multiplicative concentration update toward a target acceptance.

    Low acceptance tightens the proposal (raises kappa); the update is
    ``kappa * exp(rate * (target - acceptance))`` clamped to ``bounds``.
    """
    new = kappa * math.exp(rate * (target - window_acceptance))
    return min(max(new, bounds[0]), bounds[1])


class _ObservedStats:
    """Per-outcome observed counts, moments and ranges of a dataset."""

    def __init__(self, dataset):
        cols = dataset.observed_values_by_outcome()
        self.values = cols
        self.n_obs = np.array([c.size for c in cols])
        for l, c in enumerate(cols):
            if c.size < 2:
                raise DataValidationError(
                    f"outcome {dataset.outcome_names[l]!r} has fewer than 2 "
                    "observed values"
                )
        self.means = np.array([c.mean() for c in cols])
        self.vars = np.array([c.var(ddof=1) for c in cols])
        if np.any(self.vars <= 0.0):
            raise DataValidationError("an outcome has zero observed variance")
        self.sds = np.sqrt(self.vars)
        self.ranges = np.array([c.max() - c.min() for c in cols])


class _PatternGroups:
    """Subjects grouped by observedness pattern for likelihood reuse."""

    def __init__(self, dataset):
        n_out = dataset.n_outcomes
        groups = {}
        for s in dataset.subjects:
            key = tuple(s.observed_flat_indices().tolist())
            groups.setdefault(key, []).append(s.values.ravel()[list(key)])
        self.patterns = []
        for key, rows in groups.items():
            idx = np.asarray(key, dtype=np.intp)
            block = np.ascontiguousarray(np.vstack(rows))
            xmat = np.zeros((idx.size, n_out))
            xmat[np.arange(idx.size), idx % n_out] = 1.0
            self.patterns.append((idx, block, xmat))

    def loglik(self, sigma, mean_full, tol=DEFAULT_PD_TOL):
        total = 0.0
        for idx, block, _ in self.patterns:
            yc = block - mean_full[idx]
            part = kernels.mvn_pattern_loglik(sigma, idx, np.ascontiguousarray(yc), tol)
            if part == -np.inf:
                return -np.inf
            total += part
        return total

    def centered(self, mean_full):
        """Per-pattern centered blocks for repeated likelihood evaluation."""
        return [
            (idx, np.ascontiguousarray(block - mean_full[idx]))
            for idx, block, _ in self.patterns
        ]

    @staticmethod
    def loglik_centered(sigma, centered, tol=DEFAULT_PD_TOL):
        total = 0.0
        for idx, yc in centered:
            part = kernels.mvn_pattern_loglik(sigma, idx, yc, tol)
            if part == -np.inf:
                return -np.inf
            total += part
        return total


def init_state(dataset):
    """Initial sampler state: observed means/sds, all correlations zero."""
    stats = _ObservedStats(dataset)
    spec = StructureSpec(dataset.n_outcomes, dataset.n_times)
    return ModelState(
        MomentParams(stats.means, stats.sds),
        CorrelationParams.zeros(spec.n_outcomes),
    )


def default_mean_prior(dataset):
    """Diffuse data-scaled prior: observed means, sds of (range / 4)."""
    stats = _ObservedStats(dataset)
    return stats.means.copy(), np.diag((stats.ranges / 4.0) ** 2)


def gibbs_means(dataset, state, prior, rng):
    """Exact draw of the per-outcome means from their conditional.

    ``prior`` is ``(mu0, Sigma0)`` for the L-dimensional normal prior;
    the conditional pools each subject's observed projection through the
    time-tiled design.
    """
    spec = StructureSpec(dataset.n_outcomes, dataset.n_times)
    groups = _PatternGroups(dataset)
    sigma = state.covariance_matrix(spec)
    return _gibbs_means_grouped(groups, sigma, prior, rng)


def _gibbs_means_grouped(groups, sigma, prior, rng):
    mu0, sigma0 = prior
    n_out = mu0.size
    try:
        prec = np.linalg.inv(sigma0)
    except np.linalg.LinAlgError:
        raise NumericalError("singular prior covariance for the means") from None
    rhs = prec @ mu0
    prec = prec.copy()
    for idx, block, xmat in groups.patterns:
        sub = sigma[np.ix_(idx, idx)]
        try:
            solved = np.linalg.solve(sub, np.hstack([xmat, block.sum(axis=0)[:, None]]))
        except np.linalg.LinAlgError:
            raise NumericalError("singular observed covariance block") from None
        prec += block.shape[0] * (xmat.T @ solved[:, :n_out])
        rhs += xmat.T @ solved[:, n_out]
    try:
        chol = np.linalg.cholesky(prec)
    except np.linalg.LinAlgError:
        raise NumericalError("singular posterior precision for the means") from None
    mean = np.linalg.solve(prec, rhs)
    z = rng.standard_normal(n_out)
    return mean + np.linalg.solve(chol.T, z)


def variance_candidate(stats, means, outcome, nu):
    """(shape, rate) of the inverse-gamma variance candidate for one outcome.

    Shape ``nu + n_obs/2`` and rate ``(nu+1) s2_hat + rss/2`` with the
    residual sum over observed cells only, so unbalanced and missing data
    contribute exactly the cells that exist.
    """
    l = outcome - 1
    resid = stats.values[l] - means[l]
    shape = nu + 0.5 * stats.n_obs[l]
    rate = (nu + 1.0) * stats.vars[l] + 0.5 * float(resid @ resid)
    return shape, rate


def propose_variance(dataset, means, outcome, rng, nu=2.1):
    """Draw a candidate variance for ``outcome`` (1-based)."""
    stats = _ObservedStats(dataset)
    shape, rate = variance_candidate(stats, np.asarray(means, float), outcome, nu)
    return rate / rng.gamma(shape)


def _invgamma_logpdf_unnorm(x, shape, rate):
    return -(shape + 1.0) * math.log(x) - rate / x


def correlation_support(spec, corr, param, kind, rng=None):
    """Proposal support for one correlation parameter under ``kind``.

    ``*_lu`` kinds intersect every largest-submatrix interval, ``*_l1u1``
    use one plan chosen uniformly at random (they coincide for rho, which
    has a single plan), ``*_full`` use (-1, 1).  The support depends only
    on the other parameters, so forward and reverse proposals within one
    step share it.
    """
    if kind.endswith("_full"):
        return PdInterval(-1.0, 1.0)
    plans = plans_for_param(spec, param)
    if kind.endswith("_l1u1") and len(plans) > 1:
        if rng is None:
            raise DataValidationError("l1u1 kinds need an rng to select a submatrix")
        plans = (plans[int(rng.integers(len(plans)))],)
    corr_full = assemble_correlation(spec, corr)
    return intersect_plan_intervals(corr_full, plans)


def propose_correlation(spec, corr, param, kind, rng, kappa=50.0):
    """Candidate value plus forward-minus-reverse log proposal density.

    Returns ``(candidate, log_q_diff, support)``; for uniform kinds the
    proposal densities cancel within a step and ``log_q_diff`` is 0.
    """
    support = correlation_support(spec, corr, param, kind, rng)
    lo, hi = support.lo + SUPPORT_EPS, support.hi - SUPPORT_EPS
    if not lo < hi:
        raise NumericalError(f"support for {param} collapsed to a point")
    prev = float(corr.as_vector(spec)[spec.param_names.index(param)])
    if kind.startswith("unif"):
        return float(rng.uniform(lo, hi)), 0.0, support
    fwd = rbeta_shape(kappa, prev, lo, hi)
    cand = float(rbeta_draw(rng, fwd))
    rev = rbeta_shape(kappa, cand, lo, hi)
    return cand, rbeta_logpdf(cand, fwd) - rbeta_logpdf(prev, rev), support


class _StructCache:
    """Per-spec precomputation: cell maps, per-parameter cells and plans."""

    def __init__(self, spec):
        self.spec = spec
        self.names = spec.param_names
        self.cell_map = param_index_map(spec.n_outcomes, spec.n_times)
        self.cells = []
        for k in range(len(self.names)):
            rows, cols = np.nonzero(self.cell_map == k)
            self.cells.append((rows, cols))
        self.plans = [
            [
                (np.asarray(pl.outcomes, dtype=np.intp), *pl.target_pos)
                for pl in plans_for_param(spec, name)
            ]
            for name in self.names
        ]

    def support(self, corr_full, k, kind, rng):
        if kind.endswith("_full"):
            return -1.0, 1.0
        plans = self.plans[k]
        if kind.endswith("_l1u1") and len(plans) > 1:
            plans = [plans[int(rng.integers(len(plans)))]]
        lo, hi = -1.0, 1.0
        for idx, i, j in plans:
            a, b, c = kernels.barnard_coeffs(corr_full, idx, i, j)
            disc = b * b - 4.0 * a * c
            if a >= 0.0 or disc <= 0.0:
                raise NumericalError(
                    f"no positive-definite interval for {self.names[k]}"
                )
            s = -0.5 * (b + math.copysign(math.sqrt(disc), b))
            r1 = s / a
            r2 = c / s if s != 0.0 else -r1
            lo = max(lo, min(r1, r2))
            hi = min(hi, max(r1, r2))
        if lo >= hi:
            raise NumericalError(f"empty support for {self.names[k]}")
        return lo, hi


def rng_for(seed, *key):
    """Deterministic generator derived from a base seed and an index key."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def run_chain(dataset, config, chain_index=0):
    """Run one chain; deterministic given (config.seed, chain_index)."""
    rng = rng_for(config.seed, chain_index)
    spec = StructureSpec(dataset.n_outcomes, dataset.n_times)
    struct = _StructCache(spec)
    stats = _ObservedStats(dataset)
    groups = _PatternGroups(dataset)
    nu = config.variance_prior_nu
    kind = config.candidate_kind
    use_rbeta = kind.startswith("rbeta")

    mu0 = stats.means.copy()
    sigma0 = np.diag((stats.ranges / 4.0) ** 2)
    prior = (mu0, sigma0)

    n_out, n_times = spec.n_outcomes, spec.n_times
    corr_names = struct.names
    n_corr = len(corr_names)
    col_names = (
        [f"mu.{l}" for l in range(1, n_out + 1)]
        + [f"s.{l}" for l in range(1, n_out + 1)]
        + list(corr_names)
    )

    means = stats.means.copy()
    sds = stats.sds.copy()
    r = np.zeros(n_corr)
    corr_full = np.eye(spec.dim)
    s_full = np.tile(sds, n_times)
    sigma = corr_full * np.outer(s_full, s_full)

    kappas = np.full(n_corr, config.kappa)
    acc_cnt = np.zeros(n_out + n_corr)
    pd_cnt = np.zeros(n_out + n_corr)
    try_cnt = np.zeros(n_out + n_corr)
    win_acc = np.zeros(n_corr)
    win_try = np.zeros(n_corr)

    n_keep = config.iterations - config.burn_in
    draws = np.empty((n_keep, len(col_names)))

    mean_full = tile_means(MomentParams(means, sds), n_times)
    for t in range(1, config.iterations + 1):
        in_burn = t <= config.burn_in

        means = _gibbs_means_grouped(groups, sigma, prior, rng)
        mean_full = np.tile(means, n_times)
        centered = groups.centered(mean_full)
        loglik = _PatternGroups.loglik_centered(sigma, centered)

        for l in range(n_out):
            shape, rate = variance_candidate(stats, means, l + 1, nu)
            cand_var = rate / rng.gamma(shape)
            cand_sds = sds.copy()
            cand_sds[l] = math.sqrt(cand_var)
            cand_s_full = np.tile(cand_sds, n_times)
            cand_sigma = corr_full * np.outer(cand_s_full, cand_s_full)
            cand_ll = _PatternGroups.loglik_centered(cand_sigma, centered)
            cur_var = sds[l] * sds[l]
            prior_rate = (nu + 1.0) * stats.vars[l]
            log_alpha = (
                cand_ll
                + _invgamma_logpdf_unnorm(cand_var, nu, prior_rate)
                - _invgamma_logpdf_unnorm(cand_var, shape, rate)
            ) - (
                loglik
                + _invgamma_logpdf_unnorm(cur_var, nu, prior_rate)
                - _invgamma_logpdf_unnorm(cur_var, shape, rate)
            )
            u = rng.uniform()
            if not in_burn:
                try_cnt[l] += 1
                pd_cnt[l] += 1
            if math.log(u) < log_alpha:
                sds = cand_sds
                s_full = cand_s_full
                sigma = cand_sigma
                loglik = cand_ll
                if not in_burn:
                    acc_cnt[l] += 1

        for k in range(n_corr):
            lo, hi = struct.support(corr_full, k, kind, rng)
            lo += SUPPORT_EPS
            hi -= SUPPORT_EPS
            if lo >= hi:
                raise NumericalError(f"support for {corr_names[k]} collapsed")
            if use_rbeta:
                fwd = rbeta_shape(kappas[k], r[k], lo, hi)
                cand = float(rbeta_draw(rng, fwd))
                rev = rbeta_shape(kappas[k], cand, lo, hi)
                log_q = rbeta_logpdf(cand, fwd) - rbeta_logpdf(r[k], rev)
            else:
                cand = float(rng.uniform(lo, hi))
                log_q = 0.0
            rows, cols = struct.cells[k]
            cand_corr = corr_full.copy()
            cand_corr[rows, cols] = cand
            slot = n_out + k
            if not in_burn:
                try_cnt[slot] += 1
            if in_burn:
                win_try[k] += 1
            accepted = False
            if kernels.is_pd(cand_corr, DEFAULT_PD_TOL):
                if not in_burn:
                    pd_cnt[slot] += 1
                cand_sigma = cand_corr * np.outer(s_full, s_full)
                cand_ll = _PatternGroups.loglik_centered(cand_sigma, centered)
                log_alpha = cand_ll - loglik - log_q
                u = rng.uniform()
                if math.log(u) < log_alpha:
                    corr_full = cand_corr
                    sigma = cand_sigma
                    loglik = cand_ll
                    r[k] = cand
                    accepted = True
            if accepted:
                if not in_burn:
                    acc_cnt[slot] += 1
                if in_burn:
                    win_acc[k] += 1
            if config.validate_pd and not kernels.is_pd(corr_full, DEFAULT_PD_TOL):
                raise NumericalError("chain left the positive-definite region")

        if in_burn and use_rbeta and t % config.tune_window == 0:
            for k in range(n_corr):
                if win_try[k]:
                    kappas[k] = tune_kappa(
                        win_acc[k] / win_try[k],
                        kappas[k],
                        config.target_acceptance,
                        config.tune_rate,
                        (config.kappa_min, config.kappa_max),
                    )
            win_acc[:] = 0.0
            win_try[:] = 0.0

        if not in_burn:
            row = draws[t - config.burn_in - 1]
            row[:n_out] = means
            row[n_out : 2 * n_out] = sds
            row[2 * n_out :] = r

    acceptance = {}
    pd_rate = {}
    final_kappa = {}
    for l in range(n_out):
        name = f"s.{l + 1}"
        acceptance[name] = float(acc_cnt[l] / max(try_cnt[l], 1))
        pd_rate[name] = float(pd_cnt[l] / max(try_cnt[l], 1))
    for k, name in enumerate(corr_names):
        slot = n_out + k
        acceptance[name] = float(acc_cnt[slot] / max(try_cnt[slot], 1))
        pd_rate[name] = float(pd_cnt[slot] / max(try_cnt[slot], 1))
        final_kappa[name] = float(kappas[k])

    return ChainOutput(
        param_names=tuple(col_names),
        draws=draws,
        acceptance=acceptance,
        pd_rate=pd_rate,
        final_kappa=final_kappa,
        chain_index=chain_index,
        iterations=config.iterations,
        burn_in=config.burn_in,
        seed=config.seed,
    )


def _worker(args):
    dataset, config, chain_index = args
    return run_chain(dataset, config, chain_index)


def worker_count(requested):
    """Worker cap from STRUCTCORR_THREADS, the CPU count and the task."""
    env = os.environ.get("STRUCTCORR_THREADS", "").strip()
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(requested, cap))


def run_chains(dataset, config):
    """Run all configured chains; results ordered by chain index."""
    tasks = [(dataset, config, c) for c in range(config.chains)]
    workers = worker_count(config.chains)
    if workers == 1 or config.chains == 1:
        return [run_chain(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_worker, tasks))


def pooled_draws(chains, names=None):
    """Stack post-burn-in draws across chains (order: chain, iteration)."""
    if not chains:
        raise DataValidationError("no chains to pool")
    cols = chains[0].param_names if names is None else tuple(names)
    idx = [chains[0].param_names.index(n) for n in cols]
    return np.vstack([c.draws[:, idx] for c in chains])
