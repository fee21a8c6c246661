# -*- coding: utf-8 -*-
"""
The 2x2 casebook: one transported and one diffused component,

    B = diag(0, d),  A = [[a', a12], [a21, a22]],  K = [[k11, k12], [k21, k22]],

controlled either on the hyperbolic component (M = (1,0)), on the parabolic
component (M = (0,1)) or on both simultaneously (M = (1,1), A and K diagonal).
Every fixture lists the expected verdict, regularity index, exceptional modes
with the direction spanning range([B_n|M]) there, and the rough-data
obstruction flag.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from modal import Verdict, analyze
from model import TorusSubset, validate

logger = logging.getLogger(__name__)

OMEGA = ((0.0, np.pi),)
RANGE_TOL = 1e-8


@dataclass(frozen=True)
class Case:
    name: str
    description: str
    A: tuple
    K: tuple
    M: tuple
    verdict: Verdict
    p: object
    exceptional: tuple = ()
    ranges: dict = field(default_factory=dict)
    obstructed: bool = False
    d: float = 1.0

    def spec(self):
        M = np.reshape(self.M, (2, -1))
        return validate(1, 1, [[self.d]], self.A, self.K, M)


@dataclass(frozen=True)
class CaseResult:
    name: str
    passed: bool
    diffs: tuple

    def __str__(self):
        status = "ok" if self.passed else "FAIL"
        return "{0:<28s} {1}{2}".format(self.name, status, "" if self.passed else ": " + "; ".join(self.diffs))


_H = (1.0, 0.0)
_P = (0.0, 1.0)
_BOTH = (1.0, 1.0)

CASES = (
    Case("2x2-h-degenerate", "hyperbolic control, a21 = k21 = 0: parabolic component decoupled",
         ((1.0, 1.0), (0.0, 0.5)), ((0.3, 0.2), (0.0, 0.4)), _H, Verdict.NEVER, None),
    Case("2x2-h-k21", "hyperbolic control, k21 != 0: every L^2 datum",
         ((1.0, 0.5), (1.0, 0.5)), ((0.3, 0.2), (1.0, 0.4)), _H, Verdict.CONTROLLABLE_REGULAR, 0),
    Case("2x2-h-a21", "hyperbolic control, a21 != 0, k21 = 0: zero-mean parabolic datum",
         ((1.0, 0.5), (1.0, 0.5)), ((0.3, 0.2), (0.0, 0.4)), _H, Verdict.CONTROLLABLE_REGULAR, 0,
         exceptional=(0,), ranges={0: (1.0, 0.0)}),
    Case("2x2-p-degenerate", "parabolic control, a12 = k12 = 0: transported component decoupled",
         ((1.0, 0.0), (0.7, 0.5)), ((0.3, 0.0), (0.6, 0.4)), _P, Verdict.NEVER, None, obstructed=True),
    Case("2x2-p-both", "parabolic control, a12 != 0 and k12 != 0",
         ((1.0, 1.0), (0.7, 0.5)), ((0.3, 1.0), (0.6, 0.4)), _P, Verdict.CONTROLLABLE_REGULAR, 1,
         obstructed=True),
    Case("2x2-p-k12zero", "parabolic control, a12 != 0, k12 = 0: zero-mean transported datum",
         ((1.0, 1.0), (0.7, 0.5)), ((0.3, 0.0), (0.6, 0.4)), _P, Verdict.CONTROLLABLE_REGULAR, 1,
         exceptional=(0,), ranges={0: (0.0, 1.0)}, obstructed=True),
    Case("2x2-p-a12zero", "parabolic control, a12 = 0, k12 != 0",
         ((1.0, 0.0), (0.7, 0.5)), ((0.3, 1.0), (0.6, 0.4)), _P, Verdict.CONTROLLABLE_REGULAR, 2,
         obstructed=True),
    Case("2x2-sim-transport-speeds", "simultaneous control, a' != a22, k11 = k22: equal means",
         ((1.0, 0.0), (0.0, 2.0)), ((0.5, 0.0), (0.0, 0.5)), _BOTH, Verdict.CONTROLLABLE_REGULAR, 0,
         exceptional=(0,), ranges={0: (1.0, 1.0)}),
    Case("2x2-sim-generic", "simultaneous control, a' != a22, k11 != k22",
         ((1.0, 0.0), (0.0, 2.0)), ((3.5, 0.0), (0.0, 0.5)), _BOTH, Verdict.CONTROLLABLE_REGULAR, 0),
    Case("2x2-sim-nonint", "simultaneous control, a' = a22, (k11 - k22)/d = 2 not a square",
         ((1.0, 0.0), (0.0, 1.0)), ((2.5, 0.0), (0.0, 0.5)), _BOTH, Verdict.CONTROLLABLE_REGULAR, 0),
    Case("2x2-sim-int", "simultaneous control, a' = a22, (k11 - k22)/d = 9: modes +-3 constrained",
         ((1.0, 0.0), (0.0, 1.0)), ((9.5, 0.0), (0.0, 0.5)), _BOTH, Verdict.CONTROLLABLE_REGULAR, 0,
         exceptional=(-3, 3), ranges={-3: (1.0, 1.0), 3: (1.0, 1.0)}),
)

SMOKE = Case("full-control", "M = I: every component controlled",
             ((1.0, 0.5), (0.3, 0.2)), ((0.1, 0.2), (0.3, 0.4)), (1.0, 0.0, 0.0, 1.0),
             Verdict.CONTROLLABLE_REGULAR, 0)


def get_case(name):
    for case in CASES + (SMOKE,):
        if case.name == name:
            return case
    raise KeyError(name)


def check(case, T=None):
    """Compare the analysis of one fixture with its expected outcome."""
    w = TorusSubset(OMEGA)
    T = 2.0 * np.pi if T is None else T
    report = analyze(case.spec(), w, T)
    diffs = []
    if report.verdict is not case.verdict:
        diffs.append("verdict {0} != {1}".format(report.verdict.value, case.verdict.value))
    if report.p_index != case.p:
        diffs.append("p {0} != {1}".format(report.p_index, case.p))
    found = tuple(m.n for m in report.exceptional)
    if found != case.exceptional:
        diffs.append("exceptional modes {0} != {1}".format(found, case.exceptional))
    for n, direction in case.ranges.items():
        mode = report.exceptional_mode(n)
        if mode is None:
            continue
        direction = np.asarray(direction) / np.linalg.norm(direction)
        if mode.rank != 1 or mode.violation(direction) > RANGE_TOL:
            diffs.append("range at n={0} is not spanned by {1}".format(n, tuple(direction)))
    obstructed = any(r.obstructed for r in report.rough_obstructions)
    if obstructed != case.obstructed:
        diffs.append("obstruction {0} != {1}".format(obstructed, case.obstructed))
    result = CaseResult(case.name, not diffs, tuple(diffs))
    logger.debug("%s", result)
    return result


def run_casebook(include_smoke=True):
    cases = CASES + ((SMOKE,) if include_smoke else ())
    results = [check(case) for case in cases]
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.warning("casebook mismatches: %s", ", ".join(failed))
    else:
        logger.info("casebook: all %d cases reproduced", len(results))
    return results
