"""Command-line interface: ``tcpca {fit,simulate,scree,bridge}``.

Exit status is 0 on success, 2 for bad input or flags and 3 when a numerical
step fails.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .bridge import bridge_tt, invert_bridge, zero_fraction_to_threshold
from .data import (
    DEFAULT_MAX_ZERO_FRACTION,
    DEFAULT_MCLR_EPSILON,
    counts_to_abundance,
    filter_features,
    load_count_matrix,
)
from .errors import InputError, NumericalError
from .imputation import GibbsConfig
from .latent_corr import DEFAULT_NU, estimate_latent_correlation
from .pipeline import fit_tcpca
from .simulation import METHODS, DEFAULT_ZERO_LEVELS, TRANSFORMS, SimulationConfig, run_experiment
from .spectral import DEFAULT_CUMVAR, eigendecompose

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

logger = logging.getLogger("tcpca")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _name_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_input_flags(p):
    p.add_argument("--input", required=True, type=Path, help="count table, samples in rows")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--mclr-epsilon", type=float, default=DEFAULT_MCLR_EPSILON)
    p.add_argument("--zero-filter", type=float, default=DEFAULT_MAX_ZERO_FRACTION,
                   help="drop features whose zero fraction is at least this value")
    p.add_argument("--nu", type=float, default=DEFAULT_NU, help="shrinkage towards the identity")
    p.add_argument("--threads", type=int, default=1)


def build_parser():
    parser = _Parser(prog="tcpca", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tcpca {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", help="fit loadings and scores on a count table")
    _add_input_flags(fit)
    fit.add_argument("--out-dir", required=True, type=Path)
    fit.add_argument("--rank", type=int, help="fixed number of components (implies --rank-method fixed)")
    fit.add_argument("--rank-method", choices=("cumvar", "fixed"), default="cumvar")
    fit.add_argument("--cumvar-threshold", type=float, default=DEFAULT_CUMVAR)
    fit.add_argument("--gibbs-samples", type=int, default=GibbsConfig.n_samples)
    fit.add_argument("--burn-in", type=int, default=GibbsConfig.burn_in)
    fit.add_argument("--seed", type=int, default=GibbsConfig.seed)
    fit.add_argument("--dump-latent", action="store_true",
                     help="also write latent.csv and latent_imputed.csv")

    sim = sub.add_parser("simulate", help="run the chordal-distance benchmark")
    sim.add_argument("--out-dir", type=Path, default=Path("."))
    sim.add_argument("--n", type=int, default=SimulationConfig.n)
    sim.add_argument("--p", type=int, default=SimulationConfig.p)
    sim.add_argument("--r", type=int, default=SimulationConfig.r)
    sim.add_argument("--sigma", type=float, default=SimulationConfig.sigma)
    sim.add_argument("--transform", choices=TRANSFORMS, default="scaling")
    sim.add_argument("--zero-levels", type=_float_list, default=list(DEFAULT_ZERO_LEVELS))
    sim.add_argument("--reps", type=int, default=SimulationConfig.replications)
    sim.add_argument("--methods", type=_name_list, default=list(METHODS))
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--nu", type=float, default=DEFAULT_NU)
    sim.add_argument("--gibbs-samples", type=int, default=GibbsConfig.n_samples)
    sim.add_argument("--burn-in", type=int, default=GibbsConfig.burn_in)
    sim.add_argument("--threads", type=int, default=1, help="worker processes for replications")
    sim.add_argument("--table", action="store_true", help="also write results.md and print it")

    scree = sub.add_parser("scree", help="eigenvalues of the latent correlation")
    _add_input_flags(scree)
    scree.add_argument("--output", type=Path, help="CSV path; stdout when omitted")

    br = sub.add_parser("bridge", help="evaluate or invert the bridge function")
    which = br.add_mutually_exclusive_group(required=True)
    which.add_argument("--r", type=float, help="latent correlation to map to tau")
    which.add_argument("--tau", type=float, help="Kendall tau to map back to r")
    br.add_argument("--zeros", type=float, nargs=2, required=True, metavar=("ZJ", "ZK"),
                    help="zero fractions of the two features")
    br.add_argument("--tol", type=float, default=1e-6)
    return parser


def _check_common(args):
    if not 0.0 < args.nu < 1.0:
        raise InputError("--nu must lie in (0, 1)")
    if args.threads < 1:
        raise InputError("--threads must be at least 1")
    if hasattr(args, "mclr_epsilon") and not args.mclr_epsilon > 0:
        raise InputError("--mclr-epsilon must be positive")
    if hasattr(args, "zero_filter") and not 0.0 <= args.zero_filter <= 1.0:
        raise InputError("--zero-filter must lie in [0, 1]")
    if hasattr(args, "cumvar_threshold") and not 0.0 < args.cumvar_threshold <= 1.0:
        raise InputError("--cumvar-threshold must lie in (0, 1]")
    if hasattr(args, "rank") and args.rank is not None and args.rank < 1:
        raise InputError("--rank must be a positive integer")
    if args.command in ("fit", "scree") and len(args.delimiter) != 1:
        raise InputError("--delimiter must be a single character")


def _load(args):
    counts = load_count_matrix(args.input, delimiter=args.delimiter)
    counts, dropped = filter_features(counts, args.zero_filter)
    if counts.shape[1] < 2:
        raise InputError(f"only {counts.shape[1]} feature left after the zero filter")
    return counts_to_abundance(counts, args.mclr_epsilon), dropped


def _pc_names(r):
    return [f"PC{k + 1}" for k in range(r)]


def cmd_fit(args):
    _check_common(args)
    gibbs = GibbsConfig(args.gibbs_samples, args.burn_in, args.seed)
    if args.rank is None and args.rank_method == "fixed":
        raise InputError("--rank-method fixed needs --rank")
    X, dropped = _load(args)
    if args.rank is not None and not args.rank < X.shape[1]:
        raise InputError(f"--rank must be below the number of retained features ({X.shape[1]})")
    fit = fit_tcpca(
        X,
        rank=args.rank,
        rank_method=args.rank_method,
        cumvar_threshold=args.cumvar_threshold,
        nu=args.nu,
        gibbs=gibbs,
        threads=args.threads,
    )
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    fids = list(X.feature_ids)
    sids = list(X.sample_ids)
    model = fit.model
    pcs = _pc_names(model.rank)

    fit.sigma.save(out / "correlation.csv")
    io.write_csv(out / "eigenvalues.csv", ["component", "eigenvalue", "cumulative_fraction"], fit.decomposition.scree())
    io.write_csv(out / "loadings.csv", ["feature", *pcs], ([f, *row] for f, row in zip(fids, model.loadings)))
    io.write_csv(out / "scores.csv", ["sample_id", *pcs], ([s, *row] for s, row in zip(sids, fit.scores)))
    if args.dump_latent:
        io.write_csv(out / "latent.csv", ["sample_id", *fids], ([s, *row] for s, row in zip(sids, fit.latent.values)))
        io.write_csv(
            out / "latent_imputed.csv",
            ["sample_id", *fids],
            ([s, *map(int, row)] for s, row in zip(sids, fit.latent.imputed_mask)),
        )
    meta = {
        "version": __version__,
        "rank": model.rank,
        "nu": fit.sigma.shrinkage_nu,
        "sigma2": model.residual_variance,
        "feature_ids": fids,
        "thresholds": fit.sigma.sidecar()["thresholds"],
        "nonzero_counts": fit.sigma.profile.nonzero_counts.tolist(),
        "clamped_pairs": [[fids[j], fids[k]] for j, k in fit.sigma.clamped_pairs],
        "dropped_features": list(dropped),
        "config": {
            "input": str(args.input),
            "delimiter": args.delimiter,
            "mclr_epsilon": args.mclr_epsilon,
            "zero_filter": args.zero_filter,
            "nu": args.nu,
            "rank": args.rank,
            "rank_method": "fixed" if args.rank is not None else args.rank_method,
            "cumvar_threshold": args.cumvar_threshold,
            "gibbs_samples": gibbs.n_samples,
            "burn_in": gibbs.burn_in,
            "seed": gibbs.seed,
            "threads": args.threads,
        },
    }
    with io.atomic_open(out / "model.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    logger.info("rank %d, sigma2 %.4g, wrote %s", model.rank, model.residual_variance, out)
    return EXIT_OK


def cmd_simulate(args):
    _check_common(args)
    bad = [m for m in args.methods if m not in METHODS]
    if bad:
        raise InputError(f"unknown methods {bad}; choose from {', '.join(METHODS)}")
    config = SimulationConfig(
        n=args.n, p=args.p, r=args.r, sigma=args.sigma, transform=args.transform,
        zero_levels=tuple(args.zero_levels), replications=args.reps, seed=args.seed,
        methods=tuple(args.methods), nu=args.nu,
        gibbs=GibbsConfig(args.gibbs_samples, args.burn_in, 0),
    )
    result = run_experiment(config, n_jobs=args.threads)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    io.write_csv(out / "results.csv", result.COLUMNS, result.to_records())
    if args.table:
        text = (
            f"Loadings, {config.transform} transform\n\n{result.markdown('V')}\n\n"
            f"Scores, {config.transform} transform\n\n{result.markdown('U')}\n"
        )
        with io.atomic_open(out / "results.md", "w", encoding="utf-8") as fh:
            fh.write(text)
        sys.stdout.write(text)
    return EXIT_OK


def cmd_scree(args):
    _check_common(args)
    X, _ = _load(args)
    sigma = estimate_latent_correlation(X, nu=args.nu, threads=args.threads)
    rows = eigendecompose(sigma).scree()
    header = ["component", "eigenvalue", "cumulative_fraction"]
    if args.output is None:
        sys.stdout.write(",".join(header) + "\n")
        for row in rows:
            sys.stdout.write(",".join(io.fmt(c) for c in row) + "\n")
    else:
        io.write_csv(args.output, header, rows)
    return EXIT_OK


def cmd_bridge(args):
    zj, zk = args.zeros
    for z in (zj, zk):
        if not 0.0 <= z < 1.0:
            raise InputError("--zeros values must lie in [0, 1)")
    dj, dk = zero_fraction_to_threshold(zj), zero_fraction_to_threshold(zk)
    if args.r is not None:
        if not -1.0 < args.r < 1.0:
            raise InputError("--r must lie in (-1, 1)")
        r, tau = args.r, bridge_tt(args.r, dj, dk)
    else:
        if not -1.0 <= args.tau <= 1.0:
            raise InputError("--tau must lie in [-1, 1]")
        if not args.tol > 0:
            raise InputError("--tol must be positive")
        tau, r = args.tau, invert_bridge(args.tau, dj, dk, args.tol)
    sys.stdout.write("r,tau,delta_j,delta_k\n")
    sys.stdout.write(",".join(io.fmt(v) for v in (r, tau, dj, dk)) + "\n")
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "scree": cmd_scree, "bridge": cmd_bridge}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"tcpca {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"tcpca {args.command}: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"tcpca {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
