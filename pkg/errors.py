# -*- coding: utf-8 -*-
"""
Exceptions raised by the controllability toolkit.

Every error derives from ControlError so that the command line can map whole
families onto exit codes.
"""


class ControlError(Exception):
    """Root of all toolkit errors."""


# --- input and hypotheses ---

class DimensionMismatch(ControlError, ValueError):
    pass


class ConfigError(ControlError, ValueError):
    pass


class SizeExceeded(ControlError, ValueError):
    pass


class EigenvalueNotInSpectrum(ControlError, ValueError):
    def __init__(self, mu, spectrum=()):
        self.mu = mu
        self.spectrum = tuple(spectrum)
        super(EigenvalueNotInSpectrum, self).__init__(
            "{0} is not an eigenvalue of the transport block (spectrum: {1})".format(
                mu, ", ".join("{0:.6g}".format(s) for s in self.spectrum)))


class HypothesisViolation(ControlError):
    hypothesis = None

    def __init__(self, message):
        super(HypothesisViolation, self).__init__("({0}) {1}".format(self.hypothesis, message))


class H1Violated(HypothesisViolation):
    hypothesis = "H.1"


class H3Violated(HypothesisViolation):
    hypothesis = "H.3"


class H4Violated(HypothesisViolation):
    hypothesis = "H.4"


# --- numerical failures ---

class NumericalFailure(ControlError):
    pass


class GapNotFound(NumericalFailure):
    pass


class OverflowRisk(NumericalFailure):
    pass


class QuadratureFailure(NumericalFailure):
    pass


class RankCollapse(NumericalFailure):
    pass


class GridTooCoarse(NumericalFailure):
    pass


class PhaseDegenerate(NumericalFailure):
    pass


# --- control-theoretic outcomes ---

class RankDeficientMode(ControlError):
    def __init__(self, mode, rank, dim):
        self.mode = mode
        self.rank = rank
        super(RankDeficientMode, self).__init__(
            "Kalman matrix has rank {0} < {1} at mode n={2}".format(rank, dim, mode))


class NotInE(ControlError):
    def __init__(self, mode, violation):
        self.mode = mode
        self.violation = violation
        super(NotInE, self).__init__(
            "initial datum violates the range constraint at exceptional mode n={0} "
            "(distance to range {1:.3e})".format(mode, violation))


class TimeVerdictError(ControlError):
    pass


class TimeTooShort(TimeVerdictError):
    pass


class NotControllable(TimeVerdictError):
    pass


class GeometryMismatch(ControlError):
    pass


class NoObstructionWitness(ControlError):
    pass
