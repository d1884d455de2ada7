"""Diagnostic test misclassification: forward model, inverse, FP/TP crossover."""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass

from .errors import DegenerateTestError, InvalidInputError, NonInvertibleTestError
from .population import _as_rng, _check_integral

INFORMATIVE_EPS = 1e-9


def _check_prob(name, p):
    if not (isinstance(p, numbers.Real) and 0.0 <= p <= 1.0):
        raise InvalidInputError(f"{name}={p!r} must be a probability in [0, 1]")


@dataclass(frozen=True)
class DiagnosticTest:
    sensitivity: float
    specificity: float

    def __post_init__(self):
        _check_prob("sensitivity", self.sensitivity)
        _check_prob("specificity", self.specificity)

    @property
    def youden(self):
        """se + sp - 1; zero means the result is independent of infection."""
        return self.sensitivity + self.specificity - 1.0

    @property
    def informative(self):
        return abs(self.youden) > INFORMATIVE_EPS


PERFECT_TEST = DiagnosticTest(1.0, 1.0)


@dataclass(frozen=True)
class ConfusionTable:
    true_positive: float
    false_positive: float
    false_negative: float
    true_negative: float

    @property
    def positives(self):
        return self.true_positive + self.false_positive

    @property
    def negatives(self):
        return self.false_negative + self.true_negative

    @property
    def infected(self):
        return self.true_positive + self.false_negative

    @property
    def not_infected(self):
        return self.false_positive + self.true_negative


def apply_test(infected, not_infected, test, seed=None):
    """Classify ``infected`` and ``not_infected`` people with ``test``.

    Deterministic (``seed=None``) returns expected counts.  With a seed or
    ``numpy.random.Generator``, true positives and true negatives are
    binomial draws and the complements fill the other cells.
    """
    for name, n in (("infected", infected), ("not_infected", not_infected)):
        if not (math.isfinite(n) and n >= 0):
            raise InvalidInputError(f"{name}={n!r} must be a finite count >= 0")
    rng = _as_rng(seed)
    if rng is None:
        # products first, complements by subtraction: keeps round-number
        # inputs exact (0.95 * 9900 == 9405.0, while (1 - 0.95) * 9900 is not 495)
        tp = test.sensitivity * infected
        tn = test.specificity * not_infected
    else:
        _check_integral("infected", infected)
        _check_integral("not_infected", not_infected)
        tp = int(rng.binomial(int(infected), test.sensitivity))
        tn = int(rng.binomial(int(not_infected), test.specificity))
    return ConfusionTable(tp, not_infected - tn, infected - tp, tn)


def observed_positive_rate(prevalence, test):
    """Expected fraction testing positive at a given true prevalence."""
    _check_prob("prevalence", prevalence)
    se, sp = test.sensitivity, test.specificity
    return se * prevalence + (1.0 - sp) * (1.0 - prevalence)


def raw_corrected_rate(observed, test):
    """Rogan-Gladen inverse without clamping; may fall outside [0, 1]."""
    _check_prob("observed", observed)
    if not test.informative:
        raise NonInvertibleTestError(
            f"se + sp = {test.sensitivity + test.specificity!r} is within "
            f"{INFORMATIVE_EPS} of 1; observed rate carries no prevalence information")
    return (observed - (1.0 - test.specificity)) / test.youden


def correct_observed_rate(observed, test):
    """Estimate true prevalence from an observed positive rate, clamped to [0, 1].

    Use :func:`raw_corrected_rate` to see whether clamping happened.
    """
    return min(1.0, max(0.0, raw_corrected_rate(observed, test)))


def fp_exceeds_tp_prevalence(test):
    """Prevalence below which expected false positives outnumber true positives.

    Solves ``(1 - sp) * (1 - p) = se * p``.
    """
    fpr = 1.0 - test.specificity
    denom = test.sensitivity + fpr
    if denom <= 0:
        raise DegenerateTestError("se = 0 and sp = 1: the test never returns a positive")
    return fpr / denom
