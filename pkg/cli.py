# -*- coding: utf-8 -*-
"""
Command line of the toolkit.

    ptcontrol analyze  --config run.json [--out DIR]
    ptcontrol control  --config run.json [--out DIR] [--seed S]
    ptcontrol sweep    --config run.json [--out DIR] [--seed S]
    ptcontrol wkb      --config run.json [--out DIR]
    ptcontrol casebook [--out DIR]

Every verb writes report.json into the output directory; sweep and wkb add a
CSV table and control adds the HDF5 dump of the control coefficients. Log
lines go to stderr.

Exit codes: 0 ok, 1 casebook mismatch, 2 invalid input or hypothesis
violation, 3 the time verdict blocks control, 4 datum outside E, 5 numerical
failure.
"""

import argparse
import logging
import os
import sys

import numpy as np

from algsolv import check_in_E, pipeline
from casebook import run_casebook
from config import RunConfig
from errors import (ConfigError, ControlError, DimensionMismatch, GeometryMismatch, HypothesisViolation,
                    NoObstructionWitness, NotControllable, NotInE, NumericalFailure, RankDeficientMode,
                    TimeTooShort, TimeVerdictError)
from hum import assemble_input_map, control_deficit, make_basis, min_norm_control, time_sweep
from modal import Verdict, analyze, rough_obstruction
from model import t_star
from report import (COEFFS_NAME, SWEEP_HEADER, SWEEP_NAME, WKB_NAME, save_control_coeffs, write_report,
                    write_table)
from wkb import rough_data_experiment, small_time_experiment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_INPUT = 2
EXIT_TIME = 3
EXIT_NOT_IN_E = 4
EXIT_NUMERICAL = 5


def exit_code(err):
    if isinstance(err, (HypothesisViolation, DimensionMismatch, ConfigError, NoObstructionWitness, ValueError)):
        return EXIT_INPUT
    if isinstance(err, (TimeVerdictError, GeometryMismatch)):
        return EXIT_TIME
    if isinstance(err, NotInE):
        return EXIT_NOT_IN_E
    if isinstance(err, (NumericalFailure, RankDeficientMode)):
        return EXIT_NUMERICAL
    return EXIT_MISMATCH


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def cmd_analyze(config, out):
    spec = config.spec()
    report = analyze(spec, config.omega(), config.T)
    write_report(out, "analyze", {"system": spec.to_dict(), "analysis": report.to_dict()}, config)
    return EXIT_OK


def _require_verdict(report):
    if report.verdict is Verdict.NEVER:
        raise NotControllable("the Kalman rank condition fails at every mode")
    if report.verdict is not Verdict.CONTROLLABLE_REGULAR:
        raise TimeTooShort("T={0:.6g} does not exceed T*={1:.6g} (verdict {2})".format(
            report.T, report.t_star, report.verdict.value))


def cmd_control(config, out):
    """
        Description
        -----------
            Steers the configured random datum to zero: least-norm control on
            the time basis, the two-stage algebraic pipeline, or both.
        Output
        ------
            :return: exit code; report.json and, for the least-norm control,
                control_coeffs.h5 in out.
    """
    spec = config.spec()
    w, T = config.omega(), config.T
    disc = config["discretization"].data
    method = config["experiment"]["control"].data

    analysis = analyze(spec, w, T)
    _require_verdict(analysis)
    f0 = config.initial_datum(spec)
    check_in_E(spec, f0, analysis.exceptional)

    document = {"verdict": analysis.verdict.value, "t_star": analysis.t_star, "k0": analysis.k0,
                "f0_norm": f0.l2_norm()}
    N = disc["N"]
    if method in ("hum", "both"):
        basis = make_basis(disc["basis"], T, disc["basis_size"], disc["flatness"])
        phi = assemble_input_map(spec, w, T, N, disc["N_c"], basis)
        plan, residual, sigma_min = min_norm_control(phi, control_deficit(spec, f0, T, N))
        logger.info("least-norm control: residual %.3e, sigma_min %.3e, ||u|| %.3e", residual, sigma_min,
                    plan.l2_norm())
        document["hum"] = {"residual": residual, "sigma_min": sigma_min, "leakage": 0.0, "plan": plan.describe()}
        save_control_coeffs(os.path.join(out, COEFFS_NAME), plan, {"T": T, "N": N, "seed": config.seed})
    if method in ("pipeline", "both"):
        result = pipeline(spec, f0, w, T, eps=disc["eps"], N=N, basis_size=disc["basis_size"],
                          method=disc["method"])
        document["pipeline"] = result.to_dict()
    write_report(out, "control", document, config)
    return EXIT_OK


def _collapse_ratio(points, tstar):
    """sigma_min at the largest T below T* over sigma_min at the smallest T above it."""
    below = [p for p in points if p.T < tstar]
    above = [p for p in points if p.T > tstar]
    if not below or not above:
        return None
    low = max(below, key=lambda p: p.T)
    high = min(above, key=lambda p: p.T)
    return low.sigma_min / high.sigma_min if high.sigma_min > 0.0 else None


def cmd_sweep(config, out):
    spec = config.spec()
    w = config.omega()
    disc = config["discretization"].data
    tstar = t_star(spec, w)
    if not np.isfinite(tstar):
        raise NotControllable("T* is infinite: the slowest transport speed vanishes or omega is empty")
    T_grid = [factor * tstar for factor in config["experiment"]["T_grid_factors"].data]
    f0 = config.initial_datum(spec)
    points = time_sweep(spec, w, f0, T_grid, disc["N"], disc["N_c"], disc["basis"], disc["basis_size"],
                        disc["flatness"])
    write_table(os.path.join(out, SWEEP_NAME), SWEEP_HEADER, [(p.T, p.sigma_min, p.residual) for p in points])
    document = {"t_star": tstar, "points": [{"T": p.T, "sigma_min": p.sigma_min, "residual": p.residual}
                                            for p in points],
                "collapse_ratio": _collapse_ratio(points, tstar)}
    write_report(out, "sweep", document, config)
    return EXIT_OK


def _obstructed_eigenvalue(spec):
    for mu in spec.transport.eigenvalues:
        if rough_obstruction(spec, mu).obstructed:
            return mu
    raise NoObstructionWitness("M^* observes every transport eigenspace")


def cmd_wkb(config, out):
    spec = config.spec()
    w, T = config.omega(), config.T
    disc = config["discretization"].data
    exp = config["experiment"].data
    common = dict(q=exp["q"], n0=exp["n0"], profile_grid=disc["grid"], steps=disc["steps"])
    if exp["kind"] == "small-time":
        result = small_time_experiment(spec, w, T, exp["h_list"], exp["cutoff"], mu=exp["mu"], **common)
    else:
        mu = _obstructed_eigenvalue(spec) if exp["mu"] is None else exp["mu"]
        result = rough_data_experiment(spec, w, T, mu, exp["h_list"], exp["cutoff"], **common)
    write_table(os.path.join(out, WKB_NAME), result.header, result.table())
    write_report(out, "wkb", result.to_dict(), config)
    return EXIT_OK


def cmd_casebook(config, out):
    results = run_casebook()
    for result in results:
        if result.passed:
            logger.info("casebook %s", result)
        else:
            logger.warning("casebook %s", result)
    document = {"cases": [{"name": r.name, "passed": r.passed, "diffs": list(r.diffs)} for r in results],
                "passed": all(r.passed for r in results)}
    write_report(out, "casebook", document)
    return EXIT_OK if document["passed"] else EXIT_MISMATCH


COMMANDS = {
    "analyze": cmd_analyze,
    "control": cmd_control,
    "sweep": cmd_sweep,
    "wkb": cmd_wkb,
    "casebook": cmd_casebook,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="JSON run configuration")
    common.add_argument("--out", type=str, default=".", help="output directory (default: current)")
    common.add_argument("--seed", type=int, default=None, help="overrides the seed of the configuration")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")

    parser = argparse.ArgumentParser(prog="ptcontrol",
                                     description="Null-controllability of parabolic-transport systems on the torus")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    sub.add_parser("analyze", parents=[common], help="controllability verdict, T*, k0, p and exceptional modes")
    sub.add_parser("control", parents=[common], help="steer the configured datum to zero")
    sub.add_parser("sweep", parents=[common], help="sigma_min and residual over a grid of horizons")
    sub.add_parser("wkb", parents=[common], help="observability experiment with WKB quasi-modes")
    sub.add_parser("casebook", parents=[common], help="check the 2x2 casebook")
    return parser


def _load(args):
    if args.command == "casebook":
        return None
    if args.config is None:
        raise ConfigError("--config is required for {0}".format(args.command))
    config = RunConfig.load(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    return config


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s: %(message)s", stream=sys.stderr)

    try:
        config = _load(args)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](config, args.out)
    except ControlError as err:
        code = exit_code(err)
        logger.error("%s: %s", type(err).__name__, err)
        return code
    except ValueError as err:
        logger.error("invalid input: %s", err)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
