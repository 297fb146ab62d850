"""Synthetic incomplete multivariate longitudinal data and operating
characteristics of the full pipeline.

Data are generated under four truth distributions (all sharing the
structured mean/covariance parameters): multivariate normal, multivariate
t with 10 or 3 degrees of freedom using the model covariance as the scale
matrix (so the realized covariance is inflated by nu/(nu-2)), and a
multivariate skew-normal with the structured correlation matrix as the
dependence core and a common marginal shape (location not
moment-corrected).  Missingness is imposed per (subject, time): draw how
many outcomes are missing, then pick which ones with probabilities
proportional to per-outcome weights, without replacement.
"""

from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, Subject
from .errors import DataValidationError, NotPositiveDefiniteError
from .sampler import SamplerConfig, rng_for, run_chains, pooled_draws
from .structure import (
    CorrelationParams,
    MomentParams,
    StructureSpec,
    assemble_correlation,
    assemble_covariance,
    is_positive_definite,
    tile_means,
)
from .weights import CrossSectionMoments, optimal_weights, posterior_weights, srm

DISTRIBUTIONS = ("normal", "t10", "t3", "skewnormal")


@dataclass(frozen=True)
class TruthSpec:
    """True parameters plus the generating distribution and panel size."""

    moments: MomentParams
    correlations: CorrelationParams
    distribution: str = "normal"
    n_subjects: int = 100
    n_times: int = 4
    skew_shape: float = 0.1

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise DataValidationError(
                f"distribution must be one of {DISTRIBUTIONS}"
            )
        if self.n_subjects < 1 or self.n_times < 1:
            raise DataValidationError("need at least one subject and one time")

    @property
    def spec(self):
        return StructureSpec(self.moments.means.size, self.n_times)

    def covariance(self):
        corr = assemble_correlation(self.spec, self.correlations)
        return assemble_covariance(self.moments, corr)

    def cross_section(self):
        return CrossSectionMoments.from_params(self.moments, self.correlations)


@dataclass(frozen=True)
class MissingnessSpec:
    """Row- and column-wise missingness mechanism.

    ``column_probs`` are per-outcome selection weights (the target
    marginal missingness pattern); ``row_dist`` gives, in order, the
    probability of exactly 1, 2, ..., L-1 missing outcomes at a time
    point, with the final entry the probability that all L are observed.
    """

    column_probs: np.ndarray
    row_dist: np.ndarray

    def __post_init__(self):
        col = np.asarray(self.column_probs, dtype=float)
        row = np.asarray(self.row_dist, dtype=float)
        if col.ndim != 1 or row.shape != col.shape:
            raise DataValidationError("column_probs and row_dist must be equal-length")
        if np.any(col < 0) or np.any(col > 1):
            raise DataValidationError("column probabilities must lie in [0, 1]")
        if np.any(row < 0) or abs(row.sum() - 1.0) > 1e-9:
            raise DataValidationError("row distribution must sum to 1")
        object.__setattr__(self, "column_probs", col)
        object.__setattr__(self, "row_dist", row)

    def missing_count_probs(self):
        """Probability of k missing outcomes, indexed k = 0..L-1."""
        probs = np.zeros(self.row_dist.size)
        probs[0] = self.row_dist[-1]
        probs[1:] = self.row_dist[:-1]
        return probs

    def validate_feasible(self):
        selectable = int(np.count_nonzero(self.column_probs))
        probs = self.missing_count_probs()
        max_missing = max((k for k in range(probs.size) if probs[k] > 0), default=0)
        if max_missing > selectable:
            raise DataValidationError(
                f"row distribution requires {max_missing} missing outcomes but only "
                f"{selectable} have positive column probability"
            )


def _draw_normal_core(truth, rng):
    """(N, p) draws of the centered dependence core, pre scale/location."""
    spec = truth.spec
    p = spec.dim
    corr = assemble_correlation(spec, truth.correlations)
    if not is_positive_definite(corr):
        raise NotPositiveDefiniteError("truth correlation matrix is not PD")
    chol = np.linalg.cholesky(corr)
    z = rng.standard_normal((truth.n_subjects, p))
    return z @ chol.T


def generate_dataset(truth, rng):
    """Complete synthetic dataset of N subjects at J times."""
    spec = truth.spec
    p = spec.dim
    mean_full = tile_means(truth.moments, truth.n_times)
    s_full = np.tile(truth.moments.sds, truth.n_times)

    if truth.distribution == "normal":
        core = _draw_normal_core(truth, rng)
    elif truth.distribution in ("t10", "t3"):
        df = 10.0 if truth.distribution == "t10" else 3.0
        core = _draw_normal_core(truth, rng)
        mix = rng.chisquare(df, size=truth.n_subjects) / df
        core = core / np.sqrt(mix)[:, None]
    else:  # skewnormal
        corr = assemble_correlation(spec, truth.correlations)
        if not is_positive_definite(corr):
            raise NotPositiveDefiniteError("truth correlation matrix is not PD")
        alpha = np.full(p, truth.skew_shape)
        delta = corr @ alpha / np.sqrt(1.0 + alpha @ corr @ alpha)
        resid = corr - np.outer(delta, delta)
        chol = np.linalg.cholesky(resid)
        u0 = np.abs(rng.standard_normal(truth.n_subjects))
        z = rng.standard_normal((truth.n_subjects, p))
        core = u0[:, None] * delta + z @ chol.T

    values = mean_full + s_full * core
    subjects = tuple(
        Subject(
            f"subj{i + 1}",
            values[i].reshape(truth.n_times, spec.n_outcomes),
            np.ones((truth.n_times, spec.n_outcomes), dtype=bool),
        )
        for i in range(truth.n_subjects)
    )
    names = tuple(f"y{l + 1}" for l in range(spec.n_outcomes))
    return Dataset(subjects, names)


def apply_missingness(dataset, miss, rng):
    """Mask cells of a complete dataset under the given mechanism.

    Per (subject, time): draw the number of missing outcomes, then choose
    which outcomes go missing with probabilities proportional to the
    column weights, without replacement.  A draw that would leave a
    subject with no observed cells is redrawn.
    """
    miss.validate_feasible()
    n_out = dataset.n_outcomes
    if miss.column_probs.size != n_out:
        raise DataValidationError("missingness spec does not match outcome count")
    count_probs = miss.missing_count_probs()
    counts = np.arange(n_out)
    col = miss.column_probs
    selectable = np.flatnonzero(col)

    subjects = []
    for s in dataset.subjects:
        for _attempt in range(100):
            observed = s.observed.copy()
            for t in range(s.n_times):
                m = int(rng.choice(counts, p=count_probs))
                if m == 0:
                    continue
                weights = col[selectable] / col[selectable].sum()
                gone = rng.choice(selectable, size=m, replace=False, p=weights)
                observed[t, gone] = False
            if observed.any():
                break
        else:
            raise DataValidationError(
                "missingness mechanism keeps masking every cell of a subject"
            )
        subjects.append(Subject(s.subject_id, s.values.copy(), observed))
    return Dataset(tuple(subjects), dataset.outcome_names)


@dataclass(frozen=True)
class OpCharReport:
    """Frequentist operating characteristics over simulation replicates."""

    quantities: tuple
    coverage: np.ndarray
    bias: np.ndarray
    rmse: np.ndarray
    truth: np.ndarray
    replicates: int
    acceptance: dict
    pd_rate: dict

    def row(self, name):
        i = self.quantities.index(name)
        return {
            "coverage": float(self.coverage[i]),
            "bias": float(self.bias[i]),
            "rmse": float(self.rmse[i]),
            "truth": float(self.truth[i]),
        }


def true_quantities(truth):
    """True optimal weights and SRM implied by a truth specification."""
    w, val = optimal_weights(truth.cross_section())
    return w, val


def run_replicate(truth, miss, config, master_seed, replicate):
    """Generate, optionally mask, and fit one replicate; returns the
    weight summary and per-chain diagnostics."""
    data_rng = rng_for(master_seed, 0, replicate)
    dataset = generate_dataset(truth, data_rng)
    if miss is not None:
        dataset = apply_missingness(dataset, miss, rng_for(master_seed, 1, replicate))
    fit_seed = int(
        np.random.SeedSequence(entropy=master_seed, spawn_key=(2, replicate))
        .generate_state(1)[0]
    )
    chains = run_chains(dataset, replace(config, seed=fit_seed))
    n_out = dataset.n_outcomes
    mu_names = [f"mu.{l + 1}" for l in range(n_out)]
    sd_names = [f"s.{l + 1}" for l in range(n_out)]
    eta_names = [n for n in chains[0].param_names if n.startswith("eta.")]
    summary = posterior_weights(
        pooled_draws(chains, mu_names),
        pooled_draws(chains, sd_names),
        pooled_draws(chains, eta_names),
    )
    return summary, chains


def run_study(truth, miss, replicates, config):
    """Coverage/bias/RMSE of weights and SRM over simulation replicates.

    Truth values come from :func:`optimal_weights` at the true moments;
    per replicate the 95% interval is the componentwise percentile
    interval of the per-draw optimal weights (SRM likewise) and the point
    estimate plugs in posterior medians.  Acceptance and
    positive-definiteness rates are averaged over replicates and chains.
    """
    if replicates < 2:
        raise DataValidationError("need at least 2 replicates")
    w_true, srm_true = true_quantities(truth)
    n_out = truth.moments.means.size
    quantities = tuple([f"w.{l + 1}" for l in range(n_out)] + ["srm"])
    target = np.concatenate([w_true, [srm_true]])

    covered = np.zeros(len(quantities))
    bias = np.zeros(len(quantities))
    sqerr = np.zeros(len(quantities))
    acc_sum, pd_sum, n_chains = {}, {}, 0

    for rep in range(replicates):
        summary, chains = run_replicate(truth, miss, config, config.seed, rep)
        point = np.concatenate([summary.point_weights, [summary.point_srm_opt]])
        lo = np.concatenate([summary.weight_lower, [summary.srm_opt_interval[0]]])
        hi = np.concatenate([summary.weight_upper, [summary.srm_opt_interval[1]]])
        covered += (lo <= target) & (target <= hi)
        bias += point - target
        sqerr += (point - target) ** 2
        for chain in chains:
            n_chains += 1
            for name, v in chain.acceptance.items():
                acc_sum[name] = acc_sum.get(name, 0.0) + v
            for name, v in chain.pd_rate.items():
                pd_sum[name] = pd_sum.get(name, 0.0) + v

    return OpCharReport(
        quantities=quantities,
        coverage=covered / replicates,
        bias=bias / replicates,
        rmse=np.sqrt(sqerr / replicates),
        truth=target,
        replicates=replicates,
        acceptance={k: v / n_chains for k, v in acc_sum.items()},
        pd_rate={k: v / n_chains for k, v in pd_sum.items()},
    )
