"""Command-line interface.

Subcommands: ``simulate``, ``theory``, ``bound``, ``covest``, ``realdata``.
Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, NumericalError, SDLTestError

log = logging.getLogger("sdltest")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

_FLAG_KEYS = {
    "p": "p", "n": "n", "s0": "s0", "mu": "mu", "sigma": "sigma", "replicates": "replicates",
    "alpha": "alpha", "covariance": "covariance.kind", "band": "covariance.band",
    "off": "covariance.off", "precision": "precision", "lambda_mode": "lambda.mode",
    "kappa_source": "lambda.kappa_source", "kappa": "lambda.kappa", "lam": "lambda.value",
}


def _simulate(args) -> int:
    from .harness.config import config_from_entries, parse_keyvalue
    from .harness.experiments import run_synthetic
    from .harness.reporting import write_report

    entries = {}
    base = None
    if args.config:
        path = Path(args.config)
        try:
            entries = parse_keyvalue(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        base = path.parent
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr)
        if value is not None:
            entries[key] = str(value)
    if args.lam is not None and args.lambda_mode is None:
        entries["lambda.mode"] = "fixed"
    if args.seed is not None:
        entries["seed"] = str(args.seed)
    workers = args.workers
    if workers is None:
        try:
            workers = int(entries.pop("workers", "1"))
        except ValueError as exc:
            raise ConfigError(f"key 'workers': cannot parse {exc}") from exc
    else:
        entries.pop("workers", None)
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    config = config_from_entries(entries, base)

    report = run_synthetic(config, workers=workers)
    paths = write_report(report, args.out)
    for agg in report.aggregates:
        print(
            f"alpha={agg.alpha:g} ok={agg.replicates_ok}/{config.replicates} "
            f"type_I={_fmt(agg.type_I_mean)}±{_fmt(agg.type_I_std)} "
            f"power={_fmt(agg.power_mean)}±{_fmt(agg.power_std)} theory={_fmt(agg.theory_mean)}"
        )
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    if len(report.failed) == config.replicates:
        log.error("every replicate failed; first error: %s", report.failed[0].error)
        return EXIT_NUMERICAL
    return EXIT_OK


def _fmt(v):
    return "NA" if v is None else f"{v:.5f}"


# ---------------------------------------------------------------------------
# theory
# ---------------------------------------------------------------------------


def _theory(args) -> int:
    from .harness.reporting import write_power_curve
    from .theory import power_curve, theory_point

    if args.mu0 is not None:
        mu0 = args.mu0
    elif args.mu is not None and args.n is not None:
        mu0 = args.mu * math.sqrt(args.n) / args.sigma
    else:
        raise ConfigError("give --mu0, or --mu together with --n (and optionally --sigma)")
    if args.alpha:
        alphas = _floats(args.alpha)
    else:
        alphas = list(np.round(np.linspace(0.0, 0.2, 41)[1:], 10))
    pt = theory_point(args.epsilon, args.delta)
    log.info("xi*=%.10g M=%.10g tau*=%s", pt.xi_star, pt.M, pt.tau_star)
    rows = power_curve(args.epsilon, args.delta, mu0, alphas)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_power_curve(out / "power_curve.csv", rows)
        (out / "theory.json").write_text(
            json.dumps({"epsilon": pt.epsilon, "delta": pt.delta, "xi_star": pt.xi_star, "M": pt.M,
                        "tau_star": pt.tau_star if pt.finite else "inf", "mu0": mu0}, indent=2) + "\n",
            encoding="utf-8",
        )
    else:
        write_power_curve(sys.stdout, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# bound
# ---------------------------------------------------------------------------


def _bound(args) -> int:
    from . import theory
    from .model import CovarianceModel, SignalSpec, build_covariance, sample_instance

    out = {"kind": args.kind, "alpha": args.alpha, "mu": args.mu, "sigma": args.sigma, "n": args.n}
    if args.kind == "standard":
        if args.xi is None:
            value, xi = theory.best_corollary1_bound(args.alpha, args.mu, args.sigma, args.n, args.s0)
        else:
            xi = args.xi
            value = theory.corollary1_bound(args.alpha, args.mu, args.sigma, args.n, args.s0, xi)
        out.update(s0=args.s0, xi=xi, bound=value)
    else:
        if args.p is None:
            raise ConfigError(f"bound {args.kind} needs --p")
        if args.covariance == "circulant":
            model = CovarianceModel.circulant(args.band, args.off)
        else:
            model = CovarianceModel.identity()
        S = _ints(args.S) if args.S else []
        if args.kind == "minimax":
            Sigma = build_covariance(model, args.p)
            if args.ell is None:
                value, ell = theory.best_minimax_upper_bound(args.alpha, args.mu, args.sigma, Sigma, args.i, S, args.s0, args.n)
            else:
                ell = args.ell
                value = theory.minimax_upper_bound(args.alpha, args.mu, args.sigma, Sigma, args.i, S, args.s0, args.n, ell)
            out.update(p=args.p, s0=args.s0, i=args.i, S=S, ell=ell, bound=value)
        else:
            inst = sample_instance(model, SignalSpec(args.p, 0), args.n, 0.0, args.seed or 0)
            value = theory.oracle_power(inst.X, args.i, S, args.mu, args.sigma, args.alpha)
            out.update(p=args.p, i=args.i, S=S, seed=args.seed or 0, bound=value)
    print(json.dumps(out))
    return EXIT_OK


# ---------------------------------------------------------------------------
# covest
# ---------------------------------------------------------------------------


def _covest(args) -> int:
    from .covest import estimate_covariance
    from .harness.config import load_config, read_matrix_csv, write_matrix_csv
    from .model import sample_instance

    if args.data:
        X = read_matrix_csv(args.data)
    elif args.config:
        config, _ = load_config(args.config)
        seed = config.base_seed if args.seed is None else args.seed
        X = sample_instance(config.covariance, config.signal, config.n, config.sigma, seed).X
    else:
        raise ConfigError("covest needs --data or --config")
    est = estimate_covariance(X)
    print(json.dumps({"sigma1": est.sigma1, "sigma2": est.sigma2, "threshold": est.threshold, "kept_fraction": est.kept_fraction}))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_matrix_csv(out / "sigma_hat.csv", est.sigma_hat)
    return EXIT_OK


# ---------------------------------------------------------------------------
# realdata
# ---------------------------------------------------------------------------


def _realdata(args) -> int:
    from .harness.realdata import RealDataConfig, run_realdata
    from .harness.reporting import write_report

    config = RealDataConfig(
        data_path=args.data,
        subsample_n=args.subsample_n,
        active_threshold=args.threshold,
        alpha_levels=tuple(_floats(args.alpha)),
        replicates=args.replicates,
        base_seed=args.seed or 0,
        response_col=args.response_col,
        skip_cols=tuple(_ints(args.skip_cols)) if args.skip_cols else (),
        header=args.header,
        rank_tol=args.rank_tol,
        lam=args.lam,
    )
    report = run_realdata(config)
    paths = write_report(report, args.out)
    print(f"n_total={report.extra['n_total']} p={report.extra['p']} dropped={len(report.extra['dropped_columns'])} "
          f"active={len(report.extra['active_columns'])}")
    for agg in report.aggregates:
        print(f"alpha={agg.alpha:g} type_I={_fmt(agg.type_I_mean)} power={_fmt(agg.power_mean)}")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return EXIT_OK if len(report.failed) < config.replicates else EXIT_NUMERICAL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sdltest", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="Monte Carlo replicates on a synthetic design")
    sim.add_argument("--config", help="key/value config file")
    sim.add_argument("--seed", type=int, help="base seed (replicate r uses seed+r)")
    sim.add_argument("--workers", type=int, help="parallel processes (default 1)")
    sim.add_argument("--out", default="out")
    for name, kind in (("p", int), ("n", int), ("s0", int), ("mu", float), ("sigma", float), ("replicates", int),
                       ("band", int), ("off", float), ("kappa", float), ("lam", float)):
        sim.add_argument(f"--{name}", type=kind)
    sim.add_argument("--alpha", help="comma-separated significance levels")
    sim.add_argument("--covariance", choices=("identity", "circulant"))
    sim.add_argument("--precision", choices=("exact", "estimated", "identity"))
    sim.add_argument("--lambda-mode", dest="lambda_mode", choices=("calibrated", "fixed"))
    sim.add_argument("--kappa-source", dest="kappa_source", choices=("epsilon_bar", "true_epsilon"))
    sim.set_defaults(func=_simulate)

    th = sub.add_parser("theory", help="asymptotic power curve (alpha, G(alpha, mu0/tau*))")
    th.add_argument("--epsilon", type=float, required=True)
    th.add_argument("--delta", type=float, required=True)
    th.add_argument("--mu0", type=float)
    th.add_argument("--mu", type=float)
    th.add_argument("--n", type=int)
    th.add_argument("--sigma", type=float, default=1.0)
    th.add_argument("--alpha", help="comma-separated alpha grid (default 0.005..0.2)")
    th.add_argument("--out")
    th.set_defaults(func=_theory)

    bd = sub.add_parser("bound", help="upper bounds on the power of any test")
    bd.add_argument("kind", choices=("standard", "minimax", "oracle"),
                    help="standard-design bound, minimax bound for a given Sigma, or oracle power")
    bd.add_argument("--alpha", type=float, default=0.05)
    bd.add_argument("--mu", type=float, required=True)
    bd.add_argument("--sigma", type=float, default=1.0)
    bd.add_argument("--n", type=int, required=True)
    bd.add_argument("--s0", type=int, default=1)
    bd.add_argument("--p", type=int)
    bd.add_argument("--i", type=int, default=0)
    bd.add_argument("--S", help="comma-separated conditioning set")
    bd.add_argument("--xi", type=float)
    bd.add_argument("--ell", type=float)
    bd.add_argument("--covariance", choices=("identity", "circulant"), default="identity")
    bd.add_argument("--band", type=int, default=5)
    bd.add_argument("--off", type=float, default=0.1)
    bd.add_argument("--seed", type=int)
    bd.set_defaults(func=_bound)

    cv = sub.add_parser("covest", help="thresholded covariance estimate")
    cv.add_argument("--data", help="design matrix CSV (header-free)")
    cv.add_argument("--config", help="sample the design from this experiment config")
    cv.add_argument("--seed", type=int)
    cv.add_argument("--out")
    cv.set_defaults(func=_covest)

    rd = sub.add_parser("realdata", help="SDL-test on subsamples of a real data table")
    rd.add_argument("--data", required=True, help="comma-separated data file")
    rd.add_argument("--subsample-n", dest="subsample_n", type=int, default=84)
    rd.add_argument("--threshold", type=float, default=0.04, help="|theta0_i| above this counts as active")
    rd.add_argument("--alpha", default="0.01,0.025,0.05")
    rd.add_argument("--replicates", type=int, default=20)
    rd.add_argument("--seed", type=int)
    rd.add_argument("--response-col", dest="response_col", type=int, default=-1)
    rd.add_argument("--skip-cols", dest="skip_cols", default="0,1,2,3,4")
    rd.add_argument("--header", action=argparse.BooleanOptionalAction, default=None)
    rd.add_argument("--rank-tol", dest="rank_tol", type=float, default=1e-8)
    rd.add_argument("--lam", type=float, help="fixed lambda instead of calibration")
    rd.add_argument("--out", default="out")
    rd.set_defaults(func=_realdata)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SDLTestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
