"""Command-line interface.

Subcommands: ``fit``, ``plot``, ``logratio``, ``distances``, ``simulate``.
Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.  The input path ``@arctic-lake`` names the bundled
Arctic lake sediment data.
"""

import argparse
import logging
import os
import sys

import numpy as np

from .dataio import RunConfig, parse_csv, write_matrix, write_rows
from .errors import CompqlError, ConfigError, ConvergenceError, ZerosUnsupportedError
from .inference import coefficient_table, estimate_centered_dispersion
from .logratio import fit_logratio_lm, predict_logratio
from .model import IdentificationConstraint, logit_probabilities
from .multivariate import (
    aitchison_distance_matrix,
    compositional_residuals,
    distance_matrix,
)
from .simulate import load_scenario, results_csv, run_study, summarize, summary_csv, with_seed
from .solver import SolverConfig, fit
from .ternary import TernarySVG

log = logging.getLogger("compql")

METHOD_NAMES = {"gamma": "gamma_trick", "scoring": "fisher_scoring", "both": "both_crosscheck"}
CURVE_POINTS = 256


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _split(text):
    return tuple(s.strip() for s in text.split(",") if s.strip()) if text else ()


def _constraint(text, parts):
    if text in (None, "sum"):
        return IdentificationConstraint()
    if text.startswith("ref:"):
        name = text[4:]
        if name in parts:
            return IdentificationConstraint.reference(parts.index(name))
        if name.isdigit() and 1 <= int(name) <= len(parts):
            return IdentificationConstraint.reference(int(name) - 1)
        raise ConfigError(f"--constraint: unknown reference part {name!r}")
    raise ConfigError(f"--constraint must be 'sum' or 'ref:<part>', got {text!r}")


def _run_config(args):
    covs = _split(getattr(args, "covariates", None))
    logs = _split(getattr(args, "log", None))
    return RunConfig(
        input=args.input,
        parts=_split(args.parts),
        covariates=covs,
        transforms={c: "log" for c in logs},
        constraint=getattr(args, "constraint", "sum"),
        method=getattr(args, "method", "gamma"),
        out=args.out,
        plot=getattr(args, "plot", False),
        zero_adjust=getattr(args, "zero_adjust", None),
    )


def _outdir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _covariate_grid(data, n=CURVE_POINTS):
    """Grid over the range of the first covariate, others held at their means."""
    X = data.covariates
    lo, hi = X[:, 0].min(), X[:, 0].max()
    g = np.tile(X.mean(axis=0), (n, 1))
    g[:, 0] = np.linspace(lo, hi, n)
    return g


def render_ternary(data, qfit=None, lfit=None, zeros_note=False):
    svg = TernarySVG(labels=data.part_names)
    values = data.covariates[:, 0] if data.p else None
    if qfit is not None and data.p:
        g = _covariate_grid(data)
        svg.add_curve(logit_probabilities(qfit.coefficients, g), "compositional logit (quasi-likelihood)")
        if lfit is not None:
            svg.add_curve(predict_logratio(lfit, g), "log-ratio linear model", dashed=True)
    if zeros_note:
        svg.add_note("log-ratio model not shown: data contain zero parts")
    if values is not None:
        svg.add_note(f"points coloured by {data.covariate_names[0]}: blue = lowest, red = highest")
    svg.add_points(data.compositions, values)
    return svg.render()


def _try_logratio(data, ref=None, zero_adjust=None):
    try:
        return fit_logratio_lm(data, ref, zero_adjust), False
    except ZerosUnsupportedError:
        return None, True


def cmd_fit(args):
    cfg = _run_config(args)
    data = parse_csv(cfg.input, cfg)
    constraint = _constraint(cfg.constraint, data.part_names)
    out = _outdir(cfg.out)
    config = SolverConfig(method=METHOD_NAMES[cfg.method])
    try:
        res = fit(data, config, constraint=constraint)
    except ConvergenceError as exc:
        write_rows(os.path.join(out, "convergence_trace.csv"), ["iteration", "score_norm", "step"], exc.trace)
        raise
    with open(os.path.join(out, "convergence.log"), "w", encoding="utf-8") as fh:
        fh.write(f"method: {res.method_used}\niterations: {res.iterations}\n")
        fh.write(f"final_score_norm: {res.final_score_norm!r}\nconverged: {res.converged}\n")
        if res.crosscheck_difference is not None:
            fh.write(f"solver_crosscheck_max_abs_diff: {res.crosscheck_difference!r}\n")
        if res.separated_parts:
            fh.write("separated_parts: " + ", ".join(data.part_names[k] for k in res.separated_parts) + "\n")
        for it, norm, step in res.trace:
            fh.write(f"iter {it}: score_norm={norm!r} step={step!r}\n")
    write_rows(
        os.path.join(out, "coefficients.csv"),
        ["part", "covariate", "estimate", "se_model", "se_sandwich", "z_model"],
        coefficient_table(res, data),
    )
    disp = estimate_centered_dispersion(res.residuals, q=data.p + 1)
    write_matrix(os.path.join(out, "dispersion.csv"), data.part_names, disp.matrix)
    write_rows(
        os.path.join(out, "residuals.csv"),
        ["object"] + [f"r_{n}" for n in data.part_names] + [f"fitted_{n}" for n in data.part_names],
        [[i + 1] + list(map(float, r)) + list(map(float, f)) for i, (r, f) in enumerate(zip(res.residuals, res.fitted))],
    )
    if cfg.plot:
        if data.D != 3:
            raise ConfigError("--plot needs exactly 3 parts")
        lfit, zeros = _try_logratio(data)
        with open(os.path.join(out, "ternary.svg"), "w", encoding="utf-8") as fh:
            fh.write(render_ternary(data, res, lfit, zeros))
    log.info("converged in %d iterations; results in %s", res.iterations, out)
    return 0


def cmd_plot(args):
    cfg = _run_config(args)
    data = parse_csv(cfg.input, cfg)
    if data.D != 3:
        raise ConfigError(f"ternary plots need exactly 3 parts, got {data.D}")
    qfit = lfit = None
    zeros = False
    if data.p and not args.no_models:
        qfit = fit(data, SolverConfig(method=METHOD_NAMES[cfg.method]))
        lfit, zeros = _try_logratio(data)
    out = _outdir(cfg.out)
    with open(os.path.join(out, "ternary.svg"), "w", encoding="utf-8") as fh:
        fh.write(render_ternary(data, qfit, lfit, zeros))
    return 0


def cmd_logratio(args):
    cfg = _run_config(args)
    data = parse_csv(cfg.input, cfg)
    ref = None
    if args.ref:
        ref = _constraint(f"ref:{args.ref}", data.part_names).index
    lfit = fit_logratio_lm(data, ref, cfg.zero_adjust)
    out = _outdir(cfg.out)
    cols = ["(intercept)"] + list(data.covariate_names)
    refname = data.part_names[lfit.reference_part]
    names = [n for k, n in enumerate(data.part_names) if k != lfit.reference_part]
    rows = [(f"log({n}/{refname})", c, float(lfit.coefficients[j, r]))
            for j, n in enumerate(names) for r, c in enumerate(cols)]
    write_rows(os.path.join(out, "logratio_coefficients.csv"), ["logratio", "covariate", "estimate"], rows)
    return 0


def cmd_distances(args):
    cfg = _run_config(args)
    data = parse_csv(cfg.input, cfg)
    if args.kind == "aitchison":
        dm = aitchison_distance_matrix(data, squared=args.squared)
    else:
        R = compositional_residuals(data)
        kind = "mahalanobis_phi" if args.kind == "mahalanobis" else "identity"
        disp = estimate_centered_dispersion(R, q=1) if kind == "mahalanobis_phi" else None
        dm = distance_matrix(R, kind, disp, squared=args.squared)
    out = _outdir(cfg.out)
    labels = [str(i + 1) for i in range(data.N)]
    write_matrix(os.path.join(out, "distances.csv"), labels, dm.entries)
    return 0


def cmd_simulate(args):
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = with_seed(scenario, args.seed)
    results = run_study(scenario, args.replicates, workers=args.workers)
    out = _outdir(args.out)
    with open(os.path.join(out, "results.csv"), "w", encoding="utf-8") as fh:
        fh.write(results_csv(scenario, results))
    with open(os.path.join(out, "summary.csv"), "w", encoding="utf-8") as fh:
        fh.write(summary_csv(summarize(scenario, results)))
    return 0


def _data_args(p, covariates=True):
    p.add_argument("input", help="CSV file with a header row, or @arctic-lake")
    p.add_argument("--parts", required=True, help="comma-separated part columns")
    if covariates:
        p.add_argument("--covariates", default="", help="comma-separated covariate columns")
        p.add_argument("--log", default="", help="covariates to log-transform")
    p.add_argument("--out", default=".", help="output directory")


def build_parser():
    parser = _Parser(prog="compql", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("fit", help="quasi-likelihood fit of the compositional logit model")
    _data_args(p)
    p.add_argument("--constraint", default="sum", help="sum or ref:<part>")
    p.add_argument("--method", choices=sorted(METHOD_NAMES), default="gamma")
    p.add_argument("--plot", action="store_true", help="also write ternary.svg (3 parts only)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("plot", help="ternary diagram with fitted curves")
    _data_args(p)
    p.add_argument("--method", choices=sorted(METHOD_NAMES), default="gamma")
    p.add_argument("--no-models", action="store_true")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("logratio", help="additive log-ratio linear model (baseline)")
    _data_args(p)
    p.add_argument("--ref", help="reference part (name or 1-based index); default last")
    p.add_argument("--zero-adjust", type=float, default=None, metavar="EPS",
                   help="add EPS to every raw measurement first")
    p.set_defaults(func=cmd_logratio)

    p = sub.add_parser("distances", help="pairwise compositional distances")
    _data_args(p, covariates=False)
    p.add_argument("--kind", choices=("identity", "mahalanobis", "aitchison"), default="identity")
    p.add_argument("--squared", action="store_true")
    p.set_defaults(func=cmd_distances)

    p = sub.add_parser("simulate", help="Monte Carlo study from a scenario file")
    p.add_argument("scenario")
    p.add_argument("--out", default=".")
    p.add_argument("--seed", type=int, default=None, help="override the scenario's master seed")
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            raise UsageError(parser.format_usage().strip())
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except CompqlError as exc:
        print(f"compql: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"compql: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
