"""Command-line interface: fit, weights, simulate, pd-interval, replay.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3
numerical failure.  ``STRUCTCORR_THREADS`` caps worker processes.
"""

import argparse
import sys
import time
from pathlib import Path

from . import io
from .data import parse_dataset
from .errors import DataValidationError, NumericalError, StructcorrError
from .pdbounds import pd_support
from .sampler import SamplerConfig, pooled_draws, run_chains
from .simulate import run_study
from .structure import assemble_correlation, is_positive_definite
from .weights import barycentric_coordinates, posterior_weights

USAGE_EXIT = 1
DATA_EXIT = 2
NUMERIC_EXIT = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract here is exit 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(USAGE_EXIT)


def build_parser():
    parser = _Parser(prog="structcorr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="run the MCMC on a dataset CSV")
    p_fit.add_argument("--data", required=True, type=Path)
    p_fit.add_argument("--config", type=Path, help="JSON sampler config")
    p_fit.add_argument("--out", required=True, type=Path)

    p_w = sub.add_parser("weights", help="summarize construct weights from draws")
    p_w.add_argument("--draws", required=True, type=Path, help="directory of chain_*.csv")
    p_w.add_argument("--out", required=True, type=Path)
    p_w.add_argument("--barycentric", type=Path, help="also emit tetrahedron coordinates")

    p_sim = sub.add_parser("simulate", help="operating-characteristics study")
    p_sim.add_argument("--truth", required=True, type=Path)
    p_sim.add_argument("--dist", default="normal",
                       choices=["normal", "t10", "t3", "skewnormal"])
    p_sim.add_argument("--miss", default="none",
                       help="missingness JSON or 'none'")
    p_sim.add_argument("--replicates", type=int, default=100)
    p_sim.add_argument("--config", type=Path, help="JSON sampler config")
    p_sim.add_argument("--paper-scale", action="store_true",
                       help="500 replicates at 50000 iterations instead of desk scale")
    p_sim.add_argument("--out", required=True, type=Path)

    p_pd = sub.add_parser("pd-interval", help="positive-definite proposal interval")
    p_pd.add_argument("--params", required=True, type=Path,
                      help="JSON with L, J, eta.*, rho.*, gamma")
    p_pd.add_argument("--target", required=True,
                      help="parameter name, e.g. eta.1.2, rho.3 or gamma")

    p_rep = sub.add_parser("replay", help="re-run a recorded manifest")
    p_rep.add_argument("--manifest", required=True, type=Path)
    p_rep.add_argument("--out", required=True, type=Path)

    return parser


def _cmd_fit(args, *, config=None, command="fit"):
    data_path = args.data
    dataset = parse_dataset(data_path)
    if config is None:
        config = io.read_config(args.config) if args.config else SamplerConfig()
    started = time.time()
    chains = run_chains(dataset, config)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    io.write_draws(out, chains)
    io.write_diagnostics(out / "diagnostics.csv", chains)
    io.write_manifest(
        out / "manifest.json",
        command,
        config=io.config_snapshot(config),
        seed=config.seed,
        inputs={"data": str(data_path), "data_sha256": io.sha256_file(data_path)},
        wall_time=time.time() - started,
    )
    return 0


def _cmd_weights(args):
    chains = io.read_draws(args.draws)
    names = chains[0].param_names
    n_out = sum(1 for n in names if n.startswith("mu."))
    mu_names = [f"mu.{l + 1}" for l in range(n_out)]
    sd_names = [f"s.{l + 1}" for l in range(n_out)]
    eta_names = [n for n in names if n.startswith("eta.")]
    summary = posterior_weights(
        pooled_draws(chains, mu_names),
        pooled_draws(chains, sd_names),
        pooled_draws(chains, eta_names),
    )
    io.write_weight_summary(args.out, summary)
    if args.barycentric:
        io.write_barycentric(args.barycentric, barycentric_coordinates(summary.draw_weights))
    return 0


def _cmd_simulate(args, *, truth=None, miss=None, config=None, replicates=None,
                  command="simulate"):
    if truth is None:
        truth = io.read_truth(args.truth, args.dist)
    if miss is None and args.miss not in (None, "none"):
        miss = io.read_missingness(Path(args.miss))
    if replicates is None:
        replicates = 500 if args.paper_scale else args.replicates
    if config is None:
        if args.config:
            config = io.read_config(args.config)
        elif args.paper_scale:
            config = SamplerConfig(iterations=50_000, burn_in=1_000, chains=1, seed=0)
        else:
            config = SamplerConfig(iterations=5_000, burn_in=1_000, chains=1, seed=0)
    started = time.time()
    report = run_study(truth, miss, replicates, config)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    io.write_opchar(out / "opchar.csv", report)
    io.write_rate_table(out / "diagnostics.csv", report.acceptance, report.pd_rate)
    io.write_manifest(
        out / "manifest.json",
        command,
        config=io.config_snapshot(config),
        seed=config.seed,
        inputs={},
        extra={
            "truth": io.truth_snapshot(truth),
            "distribution": truth.distribution,
            "missingness": None if miss is None else {
                "column_probs": [float(x) for x in miss.column_probs],
                "row_dist": [float(x) for x in miss.row_dist],
            },
            "replicates": replicates,
        },
        wall_time=time.time() - started,
    )
    return 0


def _cmd_pd_interval(args):
    spec, params = io.read_param_file(args.params)
    if args.target not in spec.param_names:
        raise DataValidationError(
            f"unknown target {args.target!r}; expected one of {spec.param_names}"
        )
    corr = assemble_correlation(spec, params)
    if not is_positive_definite(corr):
        raise DataValidationError("input correlation parameters are not positive definite")
    interval = pd_support(spec, params, args.target)
    print(f"{interval.lo:.12f} {interval.hi:.12f}")
    return 0


def _cmd_replay(args):
    manifest = io.read_manifest(args.manifest)
    command = manifest.get("command")
    config = SamplerConfig(**manifest["config"]) if manifest.get("config") else None
    if command == "fit":
        data_path = Path(manifest["inputs"]["data"])
        recorded = manifest["inputs"].get("data_sha256")
        if recorded and io.sha256_file(data_path) != recorded:
            raise DataValidationError(
                f"{data_path}: checksum differs from the recorded run"
            )
        ns = argparse.Namespace(data=data_path, out=args.out, config=None)
        return _cmd_fit(ns, config=config, command="fit")
    if command == "simulate":
        from .simulate import MissingnessSpec, TruthSpec
        from .structure import CorrelationParams, MomentParams, StructureSpec

        snap = manifest["truth"]
        moments = MomentParams(snap["mu"], snap["sd"])
        spec = StructureSpec(moments.means.size, int(snap["n_times"]))
        eta = [snap[f"eta.{a}.{b}"] for a, b in spec.eta_pairs]
        rho = [snap[f"rho.{a}"] for a in range(1, spec.n_outcomes + 1)]
        truth = TruthSpec(
            moments,
            CorrelationParams(eta, rho, snap["gamma"]),
            manifest["distribution"],
            int(snap["n_subjects"]),
            int(snap["n_times"]),
            float(snap.get("skew_shape", 0.1)),
        )
        miss = None
        if manifest.get("missingness"):
            miss = MissingnessSpec(**manifest["missingness"])
        ns = argparse.Namespace(out=args.out)
        return _cmd_simulate(
            ns,
            truth=truth,
            miss=miss,
            config=config,
            replicates=int(manifest["replicates"]),
            command="simulate",
        )
    raise DataValidationError(f"manifest command {command!r} cannot be replayed")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    handlers = {
        "fit": _cmd_fit,
        "weights": _cmd_weights,
        "simulate": _cmd_simulate,
        "pd-interval": _cmd_pd_interval,
        "replay": _cmd_replay,
    }
    try:
        return handlers[args.command](args)
    except DataValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERIC_EXIT
    except StructcorrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
