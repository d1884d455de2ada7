"""Vaccine-effectiveness estimators for test-negative data.

Two forms are provided.  The risk-ratio form compares attack rates among
care seekers, ``1 - (a/n1) / (g/n3)``.  The odds-ratio form compares cases
with a control group, ``1 - (a*h) / (g*b)``.  The two agree whenever the
control fraction is the same in both arms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .diagnostic import apply_test, raw_corrected_rate
from .errors import (
    EmptyControlGroupError,
    InvalidInputError,
    TNDError,
    UndefinedEstimateError,
)

RISK_RATIO = "risk-ratio"
ODDS_RATIO = "odds-ratio"
METHODS = (RISK_RATIO, ODDS_RATIO)

OTHER_PATHOGEN = "other-pathogen"
PAN_NEGATIVE = "pan-negative"
COMBINED = "combined"
NOT_APPLICABLE = "not-applicable"
CONTROL_POLICIES = (OTHER_PATHOGEN, PAN_NEGATIVE, COMBINED)


def _check_count(name, x):
    if not (math.isfinite(x) and x >= 0):
        raise InvalidInputError(f"{name}={x!r} must be a finite count >= 0")


@dataclass(frozen=True)
class ObservedCounts:
    """Care seekers by vaccination arm and test result.

    ``a``/``g`` tested positive for the target pathogen, ``b``/``h`` for
    another panel pathogen only, ``c``/``i`` for nothing on the panel.
    ``two_column`` marks data that only distinguish positive from negative;
    then all negatives sit in ``c``/``i`` and ``b``/``h`` are zero.
    """

    a: float
    b: float
    c: float
    g: float
    h: float
    i: float
    two_column: bool = False

    def __post_init__(self):
        for name in "abcghi":
            _check_count(name, getattr(self, name))
        if self.two_column and (self.b or self.h):
            raise InvalidInputError("two-column counts cannot carry other-pathogen cells")

    @classmethod
    def from_positive_negative(cls, pos_vax, neg_vax, pos_unvax, neg_unvax):
        return cls(pos_vax, 0.0, neg_vax, pos_unvax, 0.0, neg_unvax, two_column=True)

    @property
    def n1(self):
        return self.a + self.b + self.c

    @property
    def n3(self):
        return self.g + self.h + self.i

    def assumption_gap(self):
        """|b/n1 - h/n3| on the observed rows."""
        if not (self.n1 > 0 and self.n3 > 0):
            raise InvalidInputError("assumption gap needs n1, n3 > 0")
        return abs(self.b / self.n1 - self.h / self.n3)


@dataclass(frozen=True)
class VEEstimate:
    value: float
    method: str
    control_group: str = NOT_APPLICABLE
    corrected: bool = False
    clamped: bool = False

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value > 1.0:
            raise UndefinedEstimateError(f"VE value {self.value!r} is not finite or exceeds 1")


def ve_risk_ratio(a, n1, g, n3):
    """``1 - (a/n1) / (g/n3)``."""
    for name, x in (("a", a), ("n1", n1), ("g", g), ("n3", n3)):
        _check_count(name, x)
    if n1 <= 0 or n3 <= 0:
        raise InvalidInputError(f"arm totals must be positive (n1={n1}, n3={n3})")
    if g <= 0:
        raise UndefinedEstimateError("no unvaccinated cases: attack-rate ratio undefined")
    return VEEstimate(1.0 - (a / n1) / (g / n3), RISK_RATIO)


def ve_odds_ratio(a, control_vax, g, control_unvax, control_group=COMBINED):
    """``1 - (a * control_unvax) / (g * control_vax)``."""
    for name, x in (("a", a), ("control_vax", control_vax),
                    ("g", g), ("control_unvax", control_unvax)):
        _check_count(name, x)
    if g <= 0 or control_vax <= 0:
        raise UndefinedEstimateError(
            f"odds ratio undefined: g={g}, vaccinated controls={control_vax}")
    return VEEstimate(1.0 - (a * control_unvax) / (g * control_vax), ODDS_RATIO, control_group)


def select_control(counts, policy):
    """Return ``(control_vax, control_unvax)`` for a control-group policy."""
    if policy not in CONTROL_POLICIES:
        raise InvalidInputError(f"unknown control policy {policy!r}")
    if counts.two_column and policy != COMBINED:
        raise EmptyControlGroupError(
            f"{policy} controls need a three-way split; these data only have test-negatives")
    if policy == OTHER_PATHOGEN:
        pair = (counts.b, counts.h)
    elif policy == PAN_NEGATIVE:
        pair = (counts.c, counts.i)
    else:
        pair = (counts.b + counts.c, counts.h + counts.i)
    if pair[0] <= 0 or pair[1] <= 0:
        raise EmptyControlGroupError(f"{policy} control group is empty in an arm: {pair}")
    return pair


def estimate(counts, method=RISK_RATIO, policy=COMBINED):
    if method == RISK_RATIO:
        return ve_risk_ratio(counts.a, counts.n1, counts.g, counts.n3)
    if method == ODDS_RATIO:
        cv, cu = select_control(counts, policy)
        return ve_odds_ratio(counts.a, cv, counts.g, cu, control_group=policy)
    raise InvalidInputError(f"unknown estimator {method!r}")


def estimate_all(counts):
    """Risk ratio plus the odds ratio under each control policy.

    Returns ``[(method, control_group, VEEstimate | TNDError), ...]``;
    undefined estimates are returned, not raised.
    """
    jobs = [(RISK_RATIO, NOT_APPLICABLE)] + [(ODDS_RATIO, p) for p in CONTROL_POLICIES]
    out = []
    for method, policy in jobs:
        try:
            result = estimate(counts, method, policy)
        except TNDError as exc:
            result = exc
        out.append((method, policy, result))
    return out


def misclassified_arms(sizes, prevalences, test):
    """Expected confusion tables per arm and the resulting positive/negative counts."""
    (n_v, n_u), (p_v, p_u) = sizes, prevalences
    for name, p in (("p_vax", p_v), ("p_unvax", p_u)):
        if not 0.0 <= p <= 1.0:
            raise InvalidInputError(f"{name}={p!r} outside [0, 1]")
    if n_v <= 0 or n_u <= 0:
        raise InvalidInputError(f"arm sizes must be positive, got {sizes}")
    infected_v, infected_u = n_v * p_v, n_u * p_u
    vax = apply_test(infected_v, n_v - infected_v, test)
    unvax = apply_test(infected_u, n_u - infected_u, test)
    counts = ObservedCounts.from_positive_negative(
        vax.positives, vax.negatives, unvax.positives, unvax.negatives)
    return vax, unvax, counts


def ve_pipeline_with_misclassification(sizes, prevalences, test, method=RISK_RATIO):
    """VE computed from test results rather than true infection status.

    ``sizes`` and ``prevalences`` are ``(vaccinated, unvaccinated)`` pairs.
    The odds-ratio variant uses all test-negatives as controls.
    """
    _, _, counts = misclassified_arms(sizes, prevalences, test)
    return estimate(counts, method, COMBINED)


def ve_corrected(positives, sizes, test):
    """Risk-ratio VE after Rogan-Gladen correction of each arm's positive rate.

    Corrected rates are clamped to [0, 1]; ``clamped`` on the result records
    whether either arm needed it.
    """
    (pos_v, pos_u), (n_v, n_u) = positives, sizes
    if n_v <= 0 or n_u <= 0:
        raise InvalidInputError(f"arm sizes must be positive, got {sizes}")
    clamped = False
    rates = []
    for pos, n in ((pos_v, n_v), (pos_u, n_u)):
        _check_count("positives", pos)
        if pos > n:
            raise InvalidInputError(f"{pos} positives in an arm of {n}")
        raw = raw_corrected_rate(pos / n, test)
        fixed = min(1.0, max(0.0, raw))
        clamped = clamped or fixed != raw
        rates.append(fixed)
    r_v, r_u = rates
    if r_u <= 0:
        raise UndefinedEstimateError("corrected unvaccinated prevalence is 0")
    return VEEstimate(1.0 - r_v / r_u, RISK_RATIO, corrected=True, clamped=clamped)
