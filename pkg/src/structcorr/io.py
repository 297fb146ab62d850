"""File formats: draw/diagnostic CSVs, flat JSON configs, run manifests.

All CSVs carry headers and print floats at 12 significant digits.  Config
and parameter files are flat key-value JSON objects; correlation
parameters use dotted keys (``eta.1.2``, ``rho.1``, ``gamma``).
"""

import csv
import dataclasses
import hashlib
import json
import time

import numpy as np

from .errors import DataValidationError
from .sampler import ChainOutput, SamplerConfig
from .simulate import MissingnessSpec, TruthSpec
from .structure import CorrelationParams, MomentParams, StructureSpec

FLOAT_FMT = "%.12g"


def _fmt(x):
    return FLOAT_FMT % float(x)


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_json(path, what):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DataValidationError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"{path}: invalid JSON ({exc})") from None


# -- sampler config ----------------------------------------------------------

def read_config(path):
    raw = _load_json(path, "config")
    if not isinstance(raw, dict):
        raise DataValidationError(f"{path}: config must be a JSON object")
    fields = {f.name for f in dataclasses.fields(SamplerConfig)}
    unknown = set(raw) - fields
    if unknown:
        raise DataValidationError(f"{path}: unknown config keys {sorted(unknown)}")
    return SamplerConfig(**raw)


def config_snapshot(config):
    return dataclasses.asdict(config)


# -- correlation parameter files ---------------------------------------------

def correlation_keys(spec):
    return spec.param_names


def read_param_file(path):
    """Parameter file for pd-interval: keys L, J, eta.*, rho.*, gamma."""
    raw = _load_json(path, "parameter")
    for key in ("L", "J"):
        if key not in raw:
            raise DataValidationError(f"{path}: missing key {key!r}")
    spec = StructureSpec(int(raw["L"]), int(raw["J"]))
    try:
        params = _corr_from_mapping(spec, raw)
    except KeyError as exc:
        raise DataValidationError(f"{path}: missing correlation key {exc}") from None
    return spec, params


def _corr_from_mapping(spec, raw):
    eta = [float(raw[f"eta.{a}.{b}"]) for a, b in spec.eta_pairs]
    if spec.n_times == 1:
        return CorrelationParams(eta, np.zeros(spec.n_outcomes), 0.0)
    rho = [float(raw[f"rho.{a}"]) for a in range(1, spec.n_outcomes + 1)]
    return CorrelationParams(eta, rho, float(raw["gamma"]))


# -- truth / missingness files -----------------------------------------------

def read_truth(path, distribution="normal"):
    """Truth file: mu, sd lists plus dotted correlation keys and sizes."""
    raw = _load_json(path, "truth")
    for key in ("mu", "sd", "n_subjects", "n_times"):
        if key not in raw:
            raise DataValidationError(f"{path}: missing key {key!r}")
    moments = MomentParams(raw["mu"], raw["sd"])
    spec = StructureSpec(moments.means.size, int(raw["n_times"]))
    try:
        corr = _corr_from_mapping(spec, raw)
    except KeyError as exc:
        raise DataValidationError(f"{path}: missing correlation key {exc}") from None
    return TruthSpec(
        moments,
        corr,
        distribution,
        int(raw["n_subjects"]),
        int(raw["n_times"]),
        float(raw.get("skew_shape", 0.1)),
    )


def truth_snapshot(truth):
    spec = truth.spec
    out = {
        "mu": [float(x) for x in truth.moments.means],
        "sd": [float(x) for x in truth.moments.sds],
        "n_subjects": truth.n_subjects,
        "n_times": truth.n_times,
        "skew_shape": truth.skew_shape,
    }
    for k, (a, b) in enumerate(spec.eta_pairs):
        out[f"eta.{a}.{b}"] = float(truth.correlations.eta[k])
    for a in range(1, spec.n_outcomes + 1):
        out[f"rho.{a}"] = float(truth.correlations.rho[a - 1])
    out["gamma"] = float(truth.correlations.gamma)
    return out


def read_missingness(path):
    raw = _load_json(path, "missingness")
    for key in ("column_probs", "row_dist"):
        if key not in raw:
            raise DataValidationError(f"{path}: missing key {key!r}")
    return MissingnessSpec(raw["column_probs"], raw["row_dist"])


# -- draws and diagnostics ---------------------------------------------------

def draw_file_name(chain_index):
    return f"chain_{chain_index + 1}.csv"


def write_draws(out_dir, chains):
    paths = []
    for chain in chains:
        path = out_dir / draw_file_name(chain.chain_index)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", *chain.param_names])
            start = chain.burn_in + 1
            for t in range(chain.n_draws):
                writer.writerow([start + t, *(_fmt(v) for v in chain.draws[t])])
        paths.append(path)
    return paths


def read_draws(draw_dir):
    """Read every chain_*.csv in a directory back into ChainOutputs."""
    paths = sorted(draw_dir.glob("chain_*.csv"))
    if not paths:
        raise DataValidationError(f"no chain_*.csv files in {draw_dir}")
    chains = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[0] != "iteration":
                raise DataValidationError(f"{path}: not a draw file")
            names = tuple(header[1:])
            rows = []
            first_iter = None
            for row in reader:
                if first_iter is None:
                    first_iter = int(row[0])
                rows.append([float(x) for x in row[1:]])
        if not rows:
            raise DataValidationError(f"{path}: no draws")
        draws = np.asarray(rows)
        burn_in = (first_iter or 1) - 1
        index = int(path.stem.split("_")[1]) - 1
        chains.append(
            ChainOutput(
                param_names=names,
                draws=draws,
                acceptance={},
                pd_rate={},
                final_kappa={},
                chain_index=index,
                iterations=burn_in + draws.shape[0],
                burn_in=burn_in,
                seed=-1,
            )
        )
    return chains


def write_diagnostics(path, chains):
    """Per-parameter acceptance/PD rates averaged across chains."""
    names = [n for n in chains[0].acceptance]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "acceptance_rate", "pd_rate", "final_kappa"])
        for name in names:
            acc = np.mean([c.acceptance[name] for c in chains])
            pd = np.mean([c.pd_rate[name] for c in chains])
            if name in chains[0].final_kappa:
                kappa = _fmt(np.mean([c.final_kappa[name] for c in chains]))
            else:
                kappa = ""
            writer.writerow([name, _fmt(acc), _fmt(pd), kappa])


def write_rate_table(path, acceptance, pd_rate):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "acceptance_rate", "pd_rate"])
        for name in acceptance:
            writer.writerow([name, _fmt(acceptance[name]), _fmt(pd_rate[name])])


# -- weight summaries and reports --------------------------------------------

def write_weight_summary(path, summary):
    n_out = summary.point_weights.size
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quantity", "point", "lower95", "upper95"])
        for l in range(n_out):
            writer.writerow(
                [
                    f"w.{l + 1}",
                    _fmt(summary.point_weights[l]),
                    _fmt(summary.weight_lower[l]),
                    _fmt(summary.weight_upper[l]),
                ]
            )
        writer.writerow(
            [
                "srm.opt",
                _fmt(summary.point_srm_opt),
                _fmt(summary.srm_opt_interval[0]),
                _fmt(summary.srm_opt_interval[1]),
            ]
        )
        writer.writerow(
            [
                "srm.equal",
                _fmt(summary.point_srm_equal),
                _fmt(summary.srm_equal_interval[0]),
                _fmt(summary.srm_equal_interval[1]),
            ]
        )
        for l in range(n_out):
            writer.writerow(
                [
                    f"srm.{l + 1}",
                    _fmt(summary.point_srm_single[l]),
                    _fmt(summary.srm_single_lower[l]),
                    _fmt(summary.srm_single_upper[l]),
                ]
            )


def write_barycentric(path, coords):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z"])
        for row in coords:
            writer.writerow([_fmt(v) for v in row])


def write_opchar(path, report):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quantity", "truth", "coverage", "bias", "rmse"])
        for i, q in enumerate(report.quantities):
            writer.writerow(
                [
                    q,
                    _fmt(report.truth[i]),
                    _fmt(report.coverage[i]),
                    _fmt(report.bias[i]),
                    _fmt(report.rmse[i]),
                ]
            )


# -- manifests ----------------------------------------------------------------

def write_manifest(path, command, *, config=None, seed=None, inputs=None,
                   extra=None, wall_time=None):
    from . import __version__

    payload = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config": config,
        "inputs": inputs or {},
        "wall_time_seconds": wall_time,
        "created_unix": time.time(),
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path):
    return _load_json(path, "manifest")
